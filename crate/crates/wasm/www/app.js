import init, { threshold, riesz, fiber } from "./pkg/choquard_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// Minimal line plot: series of {x, y, label}, optional log-x, horizontal
// reference lines {y, label} and vertical markers {x, label}.
function plot(canvas, series, { logx = false, hlines = [], vlines = [], ylabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height;
  const pad = { l: 70, r: 15, t: 15, b: 35 };
  ctx.clearRect(0, 0, W, H);
  const fx = logx ? Math.log10 : (v) => v;
  const xs = series.flatMap((s) => s.x.map(fx));
  const ys = series.flatMap((s) => s.y).concat(hlines.map((h) => h.y)).filter(Number.isFinite);
  if (!xs.length || !ys.length) return;
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const my = 0.05 * (y1 - y0);
  y0 -= my; y1 += my;
  const X = (v) => pad.l + ((fx(v) - x0) / (x1 - x0)) * (W - pad.l - pad.r);
  const Y = (v) => H - pad.b - ((v - y0) / (y1 - y0)) * (H - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, W - pad.l - pad.r, H - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  for (let i = 0; i <= 4; i++) {
    const v = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(v.toExponential(2), 4, Y(v) + 4);
  }
  for (let i = 0; i <= 5; i++) {
    const t = x0 + ((x1 - x0) * i) / 5;
    const label = logx ? "1e" + t.toFixed(1) : t.toFixed(2);
    ctx.fillText(label, pad.l + ((t - x0) / (x1 - x0)) * (W - pad.l - pad.r) - 12, H - 12);
  }
  if (ylabel) ctx.fillText(ylabel, pad.l + 6, pad.t + 12);

  ctx.setLineDash([4, 4]);
  for (const h of hlines) {
    ctx.strokeStyle = "#888";
    ctx.beginPath(); ctx.moveTo(pad.l, Y(h.y)); ctx.lineTo(W - pad.r, Y(h.y)); ctx.stroke();
    ctx.fillText(h.label, W - pad.r - 8 * h.label.length, Y(h.y) - 4);
  }
  for (const v of vlines) {
    ctx.strokeStyle = "#e08000";
    ctx.beginPath(); ctx.moveTo(X(v.x), pad.t); ctx.lineTo(X(v.x), H - pad.b); ctx.stroke();
    ctx.fillText(v.label, X(v.x) + 3, pad.t + 24);
  }
  ctx.setLineDash([]);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    let started = false;
    s.x.forEach((x, i) => {
      const y = s.y[i];
      if (!Number.isFinite(y)) return;
      const px = X(x), py = Math.max(pad.t, Math.min(H - pad.b, Y(y)));
      if (started) ctx.lineTo(px, py); else { ctx.moveTo(px, py); started = true; }
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, W - pad.r - 160, pad.t + 14 + 14 * k);
  });
}

const num = (form, name) => Number(form.elements[name].value);
const fmt = (v) => (v === null || v === undefined ? "none" : Number(v).toPrecision(6));

function wire(id, run) {
  const section = document.getElementById(id);
  const form = section.querySelector("form");
  const canvas = section.querySelector("canvas");
  const out = section.querySelector(".out");
  const go = () => {
    try {
      out.classList.remove("err");
      out.textContent = run(form, canvas);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  };
  form.addEventListener("submit", (e) => { e.preventDefault(); go(); });
  form.addEventListener("input", (e) => { if (e.target.type === "range") go(); });
  go();
}

function runThreshold(form, canvas) {
  const r = JSON.parse(threshold(num(form, "alpha"), num(form, "b"), num(form, "nu"), num(form, "mu"), num(form, "p"), num(form, "rho"), 400));
  const vlines = [{ x: r.t0, label: "t₀" }];
  if (r.r0 !== null) vlines.push({ x: r.r0, label: "R₀" }, { x: r.r1, label: "R₁" });
  // Clip the steep negative branches so the window stays readable.
  const floor = -2 * Math.abs(r.hmax) - 0.1;
  plot(canvas, [{ x: r.t, y: r.h.map((h) => Math.max(h, floor)), label: "h(ρ, t)" }], {
    logx: true,
    hlines: [{ y: 0, label: "0" }],
    vlines,
  });
  return `q = ${fmt(r.q)}   ρ₀ = ${fmt(r.rho0)}   ρ = ${fmt(r.rho)}   max h = ${fmt(r.hmax)}\n` +
    (r.r0 === null ? "no positive window: ρ ≥ ρ₀" : `R₀ = ${fmt(r.r0)}   t₀ = ${fmt(r.t0)}   R₁ = ${fmt(r.r1)}`) +
    `\nlower-critical level −½b²S₂^(−5/3)ρ^(10/3) = ${fmt(r.lower_critical_level)}`;
}

function runRiesz(form, canvas) {
  const r = JSON.parse(riesz(num(form, "alpha"), num(form, "width"), num(form, "m")));
  plot(canvas, [
    { x: r.r, y: r.grid, label: "FFT on grid" },
    { x: r.r, y: r.oracle, label: "radial quadrature" },
  ], { vlines: [{ x: 6, label: "L/4" }] });
  return `m = ${r.m}, h = ${fmt(r.h)}; max relative error for |x| < L/4: ${Number(r.max_rel_err_inner).toExponential(2)}`;
}

function runFiber(form, canvas) {
  const r = JSON.parse(fiber(num(form, "alpha"), num(form, "b"), num(form, "nu"), num(form, "mu"), num(form, "p"), num(form, "rho"), num(form, "width"), 32));
  // Plot on a signed log scale so the shallow well near τ = 1 and the far
  // hump are both visible.
  const slog = (v) => Math.sign(v) * Math.log10(1 + Math.abs(v) / 1e-9);
  plot(canvas, [{ x: r.tau, y: r.phi.map(slog), label: "φ(τ), signed log" }], {
    logx: true,
    hlines: [{ y: slog(r.plateau), label: "plateau" }],
    vlines: r.maxima.map((t) => ({ x: t, label: "max" })).concat([{ x: 1, label: "τ=1" }]),
  });
  const g = r.g4;
  return `‖∇u‖ = ${fmt(r.grad_norm)}   φ'(1) = ${fmt(r.slope_at_1)}   plateau −½b²D = ${fmt(r.plateau)}\n` +
    `local maxima at τ = ${r.maxima.map(fmt).join(", ") || "none"};  ` +
    `single hump then decreasing: ${g.inconclusive ? "inconclusive (" + g.reason + ")" : g.n_maxima <= 1 && g.decreasing_after_max !== false}`;
}

await init();
wire("threshold", runThreshold);
wire("riesz", runRiesz);
wire("fiber", runFiber);
