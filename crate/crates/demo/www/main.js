import init, { thresholdCurve, klExplorer, ensembleCounts } from "./pkg/bnlimits_demo.js";

const $ = (id) => document.getElementById(id);

function family(kind, p) {
  switch (kind) {
    case "cpt": return { kind, v: 2, theta_min: p };
    case "gaussian": return { kind, mu_a: -1, mu_b: 1, sigma_min: p, sigma_max: p };
    case "noisy_or": return { kind, theta: p };
    case "logistic": return { kind, w_max_1: p };
  }
}

const DEFAULT_PARAM = { cpt: 0.1, gaussian: 1, noisy_or: 0.9, logistic: 1 };

function call(f, req, info) {
  try {
    const out = JSON.parse(f(JSON.stringify(req)));
    info.textContent = "";
    info.className = "";
    return out;
  } catch (e) {
    info.textContent = String(e.message ?? e);
    info.className = "err";
    return null;
  }
}

/// Axes plus one or more series `{ xs, ys, color, scatter }` in data units.
function plot(canvas, series, { diagonal = false, xlabel = "", ylabel = "" } = {}) {
  const g = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 44;
  g.clearRect(0, 0, W, H);
  const fin = (v) => Number.isFinite(v);
  const xs = series.flatMap((s) => s.xs).filter(fin), ys = series.flatMap((s) => s.ys).filter(fin);
  const xmin = Math.min(...xs), xmax = Math.max(...xs);
  let ymin = Math.min(0, ...ys), ymax = Math.max(...ys);
  if (diagonal) ymax = Math.max(ymax, xmax);
  if (!(xmax > xmin)) return;
  if (!(ymax > ymin)) ymax = ymin + 1;
  const sx = (x) => pad + (x - xmin) / (xmax - xmin) * (W - 2 * pad);
  const sy = (y) => H - pad - (y - ymin) / (ymax - ymin) * (H - 2 * pad);
  g.strokeStyle = "#999"; g.fillStyle = "#444"; g.font = "11px sans-serif";
  g.beginPath(); g.moveTo(pad, pad / 2); g.lineTo(pad, H - pad); g.lineTo(W - pad / 2, H - pad); g.stroke();
  g.fillText(xmin.toPrecision(3), pad, H - pad + 14);
  g.fillText(xmax.toPrecision(3), W - pad - 20, H - pad + 14);
  g.fillText(ymax.toPrecision(3), 2, pad);
  g.fillText(ymin.toPrecision(3), 2, H - pad);
  g.fillText(xlabel, W / 2, H - 8);
  g.save(); g.translate(12, H / 2); g.rotate(-Math.PI / 2); g.fillText(ylabel, 0, 0); g.restore();
  if (ymin < 0) {
    g.strokeStyle = "#ddd"; g.beginPath(); g.moveTo(pad, sy(0)); g.lineTo(W - pad / 2, sy(0)); g.stroke();
  }
  if (diagonal) {
    g.strokeStyle = "#c33"; g.beginPath(); g.moveTo(sx(xmin), sy(xmin)); g.lineTo(sx(xmax), sy(xmax)); g.stroke();
  }
  for (const s of series) {
    g.strokeStyle = g.fillStyle = s.color ?? "#2563eb";
    if (s.scatter) {
      s.xs.forEach((x, i) => g.fillRect(sx(x) - 1, sy(s.ys[i]) - 1, 2, 2));
    } else {
      g.beginPath();
      s.xs.forEach((x, i) => (i ? g.lineTo(sx(x), sy(s.ys[i])) : g.moveTo(sx(x), sy(s.ys[i]))));
      g.stroke();
    }
  }
}

function drawCurve() {
  const k = +$("c-k").value;
  const req = {
    family: family($("c-family").value, +$("c-param").value),
    k: k > 0 ? k : null,
    m_from: 3,
    m_to: +$("c-m").value,
    rule: $("c-rule").value,
  };
  const out = call(thresholdCurve, req, $("c-info"));
  if (!out) return;
  const last = out.points[out.points.length - 1];
  $("c-info").textContent =
    `Δ_max = ${out.delta_max.toFixed(4)} · L(${last?.m}) = ${last?.threshold.toFixed(3)}` +
    ` · vacuous for ${out.points.filter((p) => p.vacuous).length} of ${out.points.length} sizes`;
  plot($("c-canvas"), [{ xs: out.points.map((p) => p.m), ys: out.points.map((p) => p.threshold) }], { xlabel: "m", ylabel: "L" });
}

/// Hyperparameters for the KL explorer: wide enough to show the spread.
const KL_FAMILY = {
  cpt: { kind: "cpt", v: 3, theta_min: 0.02 },
  gaussian: { kind: "gaussian", mu_a: -2, mu_b: 2, sigma_min: 0.5, sigma_max: 2 },
  noisy_or: { kind: "noisy_or", theta: 0.8 },
  logistic: { kind: "logistic", w_max_1: 2 },
};

function drawKl() {
  const req = { family: KL_FAMILY[$("k-family").value], pairs: +$("k-pairs").value, seed: +$("k-seed").value };
  const out = call(klExplorer, req, $("k-info"));
  if (!out) return;
  $("k-info").textContent = `${out.points.length} pairs · ${out.violations} with KL > Δ · red line: KL = Δ`;
  plot($("k-canvas"), [{ xs: out.points.map((p) => p.delta), ys: out.points.map((p) => p.kl), scatter: true }], {
    diagonal: true, xlabel: "Δ(η₁, η₂)", ylabel: "KL",
  });
}

function drawCounts() {
  const out = call(ensembleCounts, { m_to: +$("n-m").value }, $("n-info"));
  if (!out) return;
  const xs = out.map((r) => r.m);
  plot($("n-canvas"), [
    { xs, ys: out.map((r) => r.ln_upper), color: "#c33" },
    { xs, ys: out.map((r) => r.ln_count), color: "#2563eb" },
    { xs, ys: out.map((r) => r.ln_lower), color: "#16a34a" },
  ], { xlabel: "m", ylabel: "ln count" });
  $("n-info").textContent = "red: upper bound · blue: exact · green: lower bound";
  $("n-table").innerHTML = "<tr><th>m</th><th>essential DAGs</th><th>ln lower</th><th>ln count</th><th>ln upper</th></tr>" +
    out.map((r) => `<tr><td>${r.m}</td><td>${r.count}</td><td>${r.ln_lower.toFixed(2)}</td>` +
      `<td>${r.ln_count.toFixed(2)}</td><td>${r.ln_upper.toFixed(2)}</td></tr>`).join("");
}

await init();
for (const id of ["c-family", "c-param", "c-k", "c-m", "c-rule"]) $(id).addEventListener("input", drawCurve);
$("c-family").addEventListener("change", () => { $("c-param").value = DEFAULT_PARAM[$("c-family").value]; drawCurve(); });
for (const id of ["k-family", "k-pairs", "k-seed"]) $(id).addEventListener("input", drawKl);
$("n-m").addEventListener("input", drawCounts);
drawCurve();
drawKl();
drawCounts();
