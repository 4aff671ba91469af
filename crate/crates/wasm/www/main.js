import init, { randomization_histogram, asymptotic_table, power_curve } from "./pkg/hdtest_wasm.js";

const EXAMPLES = ["1", "2i", "2ii", "2iii", "3i", "3ii", "4i", "4ii"];
const COLORS = { l2: "#1f77b4", gaussian: "#ff7f0e", laplacian: "#2ca02c", l1: "#d62728" };

function field(form, name) {
  return form.querySelector(`[name="${name}"]`).value;
}

function num(form, name) {
  const v = Number(field(form, name));
  if (!Number.isFinite(v)) throw new Error(`${name} is not a number`);
  return v;
}

function show(form, html, isError = false) {
  const out = form.querySelector(".out");
  out.className = isError ? "out err" : "out";
  out.innerHTML = html;
}

function guarded(form, fn) {
  form.querySelector("button").addEventListener("click", () => {
    try {
      fn();
    } catch (e) {
      show(form, String(e.message ?? e), true);
    }
  });
}

function drawHistogram(canvas, h) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const lo = h.bins[0].lo;
  const hi = h.bins[h.bins.length - 1].hi;
  const x = (v) => ((v - lo) / (hi - lo || 1)) * (width - 20) + 10;
  const top = Math.max(...h.bins.map((b) => b.count), 1);
  ctx.fillStyle = "#9bb";
  for (const b of h.bins) {
    const bh = (b.count / top) * (height - 30);
    ctx.fillRect(x(b.lo), height - 10 - bh, Math.max(x(b.hi) - x(b.lo) - 1, 1), bh);
  }
  const mark = (v, color) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(x(v), 5);
    ctx.lineTo(x(v), height - 10);
    ctx.stroke();
  };
  mark(h.critical_value, "#888");
  mark(h.statistic, "#c00");
}

function drawCurve(canvas, points) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const betas = points.map((p) => p.beta);
  const b0 = Math.min(...betas);
  const b1 = Math.max(...betas);
  const x = (b) => ((b - b0) / (b1 - b0 || 1)) * (width - 60) + 40;
  const y = (r) => height - 20 - r * (height - 40);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(40, y(1), width - 60, y(0) - y(1));
  ctx.fillStyle = "#444";
  ctx.fillText("1", 25, y(1) + 4);
  ctx.fillText("0", 25, y(0) + 4);
  const kernels = points[0].rates.map(([k]) => k);
  kernels.forEach((k, i) => {
    ctx.strokeStyle = COLORS[k] ?? "#000";
    ctx.beginPath();
    points.forEach((p, j) => {
      const r = p.rates[i][1];
      if (j === 0) ctx.moveTo(x(p.beta), y(r));
      else ctx.lineTo(x(p.beta), y(r));
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(k, 50 + i * 80, 14);
  });
}

function fillExamples() {
  for (const sel of document.querySelectorAll('select[name="example"]')) {
    for (const e of EXAMPLES) sel.add(new Option(e, e));
  }
  document.querySelector('#hist select[name="example"]').value = "3i";
  document.querySelector('#curve select[name="example"]').value = "2i";
}

await init();
fillExamples();

const hist = document.getElementById("hist");
guarded(hist, () => {
  const h = JSON.parse(
    randomization_histogram(
      field(hist, "example"), num(hist, "p"), num(hist, "n"), num(hist, "m"), num(hist, "beta"),
      field(hist, "kernel"), num(hist, "gamma"), num(hist, "perms"), num(hist, "seed"), 40,
    ),
  );
  show(
    hist,
    `statistic ${h.statistic.toPrecision(5)}, critical value ${h.critical_value.toPrecision(5)}, ` +
      `p-value ${h.p_value.toFixed(3)}, ${h.reject ? "reject" : "do not reject"} (${h.permutations} permutations)`,
  );
  drawHistogram(hist.querySelector("canvas"), h);
});

const asym = document.getElementById("asym");
guarded(asym, () => {
  const rows = JSON.parse(
    asymptotic_table(
      num(asym, "n"), num(asym, "m"), num(asym, "e_x"), num(asym, "e_y"), num(asym, "e_xy"),
      num(asym, "v_x"), num(asym, "v_y"), num(asym, "v_xy"), field(asym, "kernel"), num(asym, "gamma"),
    ),
  );
  const fmt = (v) => (Math.abs(v) < 1e-12 ? "0" : v.toPrecision(5));
  const body = rows
    .map((r) => `<tr><td>${r.w}</td><td>${fmt(r.f_w)}</td><td>${fmt(r.mu)}</td><td>${fmt(r.sigma2)}</td><td>${fmt(r.pmf)}</td></tr>`)
    .join("");
  show(asym, `<table><tr><th>w</th><th>f(w)</th><th>mean</th><th>variance</th><th>P(W = w)</th></tr>${body}</table>`);
});

const curve = document.getElementById("curve");
guarded(curve, () => {
  const betas = field(curve, "betas").split(",").map((s) => Number(s.trim()));
  if (betas.some((b) => !Number.isFinite(b))) throw new Error("betas must be comma-separated numbers");
  const points = JSON.parse(
    power_curve(
      field(curve, "example"), num(curve, "p"), num(curve, "n"), num(curve, "m"),
      new Float64Array(betas), num(curve, "reps"), num(curve, "perms"), num(curve, "seed"),
    ),
  );
  show(curve, points.map((p) => `beta ${p.beta}: ` + p.rates.map(([k, r]) => `${k} ${r.toFixed(2)}`).join(", ")).join("<br>"));
  drawCurve(curve.querySelector("canvas"), points);
});
