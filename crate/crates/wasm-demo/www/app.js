import init, { solve, steered_pattern, robust_scan, default_config } from "./pkg/secrecy_isac_wasm.js";

const $ = (id) => document.getElementById(id);

function currentConfig() {
  const cfg = JSON.parse($("config").value);
  cfg.array.num_antennas = Number($("nt").value);
  cfg.users.count = Number($("k").value);
  cfg.targets.count = Number($("j").value);
  return cfg;
}

// Line plot of one or more series on a canvas. `series` is a list of
// {xs, ys, color}; `marks` are vertical guide lines {x, color}.
function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.xs), ys = series.flatMap((s) => s.ys);
  const x0 = opts.xmin ?? Math.min(...xs), x1 = opts.xmax ?? Math.max(...xs);
  const y0 = opts.ymin ?? Math.min(0, ...ys), y1 = Math.max(...ys, y0 + 1e-9);
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toFixed(0), pad - 5, h - pad + 14);
  ctx.fillText(x1.toFixed(0), w - pad - 10, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  if (opts.title) ctx.fillText(opts.title, pad, pad - 8);

  for (const m of opts.marks ?? []) {
    ctx.strokeStyle = m.color;
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(px(m.x), pad);
    ctx.lineTo(px(m.x), h - pad);
    ctx.stroke();
  }
  ctx.setLineDash([]);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
    if (s.dots) {
      ctx.fillStyle = s.color;
      s.xs.forEach((x, i) => ctx.fillRect(px(x) - 2, py(s.ys[i]) - 2, 4, 4));
    }
  }
}

function showError(el, e) {
  el.textContent = String(e);
  el.className = "err";
}

function runSolve() {
  const summary = $("summary");
  summary.className = "";
  summary.textContent = "solving...";
  setTimeout(() => {
    try {
      const r = JSON.parse(solve(JSON.stringify(currentConfig()), Number($("seed").value)));
      const marks = r.target_angles_deg.flatMap((t) => [
        { x: t, color: "#d33" },
        { x: t - r.beamwidth_halfangle_deg, color: "#fa0" },
        { x: t + r.beamwidth_halfangle_deg, color: "#fa0" },
      ]);
      plot($("pattern"), [{ xs: r.angles_deg, ys: r.gains, color: "#1f5fbf" }], {
        xmin: -90, xmax: 90, marks, title: "transmit beam pattern (targets red, beamwidth edges orange)",
      });
      const it = r.objective_trace.map((_, i) => i + 1);
      plot($("trace"), [
        { xs: it, ys: r.objective_trace, color: "#1f5fbf" },
        { xs: it, ys: r.secrecy_trace, color: "#2a2" },
      ], { title: "weighted sum rate (blue), sum secrecy rate (green)" });
      summary.textContent =
        `iterations ${r.iterations}, converged ${r.converged}\n` +
        `sum secrecy rate ${r.sum_secrecy_rate.toFixed(3)} bit/s/Hz ` +
        `(worst case over angle uncertainty ${r.robust_sum_secrecy_rate.toFixed(3)})\n` +
        `per-user secrecy ${r.secrecy_rates.map((x) => x.toFixed(3)).join(", ")}\n` +
        `per-user SINR dB ${r.user_sinrs_db.map((x) => x.toFixed(1)).join(", ")}\n` +
        `target angles ${r.target_angles_deg.map((x) => x.toFixed(1)).join(", ")}`;
    } catch (e) {
      showError(summary, e);
    }
  }, 10);
}

function runSteered() {
  const deg = Number($("steer").value);
  $("steerVal").textContent = deg;
  try {
    const r = JSON.parse(steered_pattern(Number($("snt").value), deg));
    plot($("steered"), [{ xs: r.angles_deg, ys: r.gains, color: "#7a3" }], {
      xmin: -90, xmax: 90, marks: [{ x: deg, color: "#d33" }], title: "|a(θ)ᴴw|² for w = a(steer)/√N",
    });
  } catch (e) {
    console.error(e);
  }
}

function runScan() {
  const status = $("scanStatus");
  status.className = "";
  status.textContent = "solving...";
  setTimeout(() => {
    try {
      const deltas = new Float64Array($("deltas").value.split(",").map(Number).filter((x) => x >= 0));
      const pts = JSON.parse(robust_scan(JSON.stringify(currentConfig()), Number($("seed").value), deltas));
      const xs = pts.map((p) => p.delta_deg);
      plot($("robust"), [
        { xs, ys: pts.map((p) => p.nominal_sum_secrecy_rate), color: "#1f5fbf", dots: true },
        { xs, ys: pts.map((p) => p.robust_sum_secrecy_rate), color: "#d33", dots: true },
      ], { title: "nominal (blue) and worst-case (red) sum secrecy rate vs half-width" });
      status.textContent = `${pts.filter((p) => p.converged).length}/${pts.length} converged`;
    } catch (e) {
      showError(status, e);
    }
  }, 10);
}

await init();
$("config").value = default_config();
$("solve").onclick = runSolve;
$("scan").onclick = runScan;
$("steer").oninput = runSteered;
$("snt").onchange = runSteered;
runSteered();
runSolve();
