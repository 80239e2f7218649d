// Glue between the static page and the wasm module. Build the module with
//   wasm-pack build crates/wasm-demo --target web --out-dir www/pkg
// then serve this directory (see README).

import init, { gen_series, run_demo, winner_probe } from "./pkg/marketgames_demo.js";

const COLORS = { WG: "#e4b34a", MinG: "#56b4e9", MajG: "#e46a6a", price: "#7f8a9e" };
const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

function params() {
  return {
    pl: parseFloat($("pl").value),
    ps: parseFloat($("ps").value),
    steps: parseInt($("steps").value, 10),
    seed: parseInt($("seed").value, 10) >>> 0,
    agents: parseInt($("agents").value, 10),
    memory: parseInt($("memory").value, 10),
    samples: parseInt($("samples").value, 10),
  };
}

// --- tiny canvas chart helpers -------------------------------------------

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function extent(arrays) {
  let lo = Infinity, hi = -Infinity;
  for (const a of arrays) for (const v of a) { if (v < lo) lo = v; if (v > hi) hi = v; }
  if (lo === hi) { lo -= 1; hi += 1; }
  return [lo, hi];
}

function drawLines(canvas, arrays, colors, { normalize = false } = {}) {
  const ctx = clear(canvas);
  const W = canvas.width, H = canvas.height, pad = 28;
  ctx.strokeStyle = "#2c3442";
  ctx.strokeRect(0.5, 0.5, W - 1, H - 1);
  const ranges = normalize ? arrays.map((a) => extent([a])) : null;
  const [lo, hi] = normalize ? [0, 1] : extent(arrays);
  const n = Math.max(...arrays.map((a) => a.length));
  const x = (i) => pad + (i / (n - 1)) * (W - 2 * pad);
  const y = (v) => H - pad - ((v - lo) / (hi - lo)) * (H - 2 * pad);
  arrays.forEach((a, k) => {
    const [alo, ahi] = normalize ? ranges[k] : [lo, hi];
    ctx.strokeStyle = colors[k];
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    a.forEach((v, i) => {
      const vv = normalize ? (v - alo) / (ahi - alo) : v;
      if (i === 0) ctx.moveTo(x(0), y(vv)); else ctx.lineTo(x(i), y(vv));
    });
    ctx.stroke();
  });
  if (!normalize) {
    ctx.fillStyle = "#8b94a7";
    ctx.font = "12px system-ui";
    ctx.fillText(hi.toFixed(0), 4, pad - 6);
    ctx.fillText(lo.toFixed(0), 4, H - 8);
  }
}

function drawBars(canvas, labels, values, colors) {
  const ctx = clear(canvas);
  const W = canvas.width, H = canvas.height, pad = 34;
  const bw = (W - 2 * pad) / values.length;
  values.forEach((v, i) => {
    const h = v * (H - 2 * pad);
    const x0 = pad + i * bw + bw * 0.18;
    ctx.fillStyle = colors[i];
    ctx.fillRect(x0, H - pad - h, bw * 0.64, h);
    ctx.fillStyle = "#e6e9ef";
    ctx.font = "14px system-ui";
    ctx.textAlign = "center";
    ctx.fillText(`${labels[i]}  ${(v * 100).toFixed(0)}%`, x0 + bw * 0.32, H - pad + 18);
  });
  ctx.strokeStyle = "#2c3442";
  ctx.beginPath();
  ctx.moveTo(pad, H - pad + 0.5);
  ctx.lineTo(W - pad, H - pad + 0.5);
  ctx.stroke();
}

// --- wiring ----------------------------------------------------------------

function redrawPrices() {
  const p = params();
  $("pl-out").value = p.pl.toFixed(2);
  $("ps-out").value = p.ps.toFixed(2);
  try {
    const data = JSON.parse(gen_series(p.pl, p.ps, p.steps, p.seed));
    drawLines($("price-chart"), [data.prices], [COLORS.price]);
    status("");
  } catch (e) {
    status(`price generation failed: ${e}`);
  }
}

function runSimulation() {
  const p = params();
  status("running simulation…");
  // let the status paint before the wasm call blocks the main thread
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const data = JSON.parse(run_demo(p.pl, p.ps, p.agents, p.memory, p.steps, p.seed));
      const wealth = data.schemes.map((s) => s.avg_wealth);
      const colors = data.schemes.map((s) => COLORS[s.label.replace("D", "")]);
      drawLines($("wealth-chart"), [...wealth, data.prices], [...colors, COLORS.price], { normalize: true });
      drawLines($("switch-chart"), data.schemes.map((s) => s.switchers), colors);
      status(`simulation done in ${(performance.now() - t0).toFixed(0)} ms — labels: ${data.schemes.map((s) => s.label).join(", ")}`);
    } catch (e) {
      status(`simulation failed: ${e}`);
    }
  }, 20);
}

function runProbe() {
  const p = params();
  status(`probing ${p.samples} samples at (${p.pl.toFixed(2)}, ${p.ps.toFixed(2)})…`);
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const data = JSON.parse(winner_probe(p.pl, p.ps, p.agents, p.steps, p.samples, p.seed));
      drawBars(
        $("probe-chart"),
        data.schemes.map((s) => s.label),
        data.schemes.map((s) => s.chance_best),
        data.schemes.map((s) => COLORS[s.label.replace("D", "")]),
      );
      status(`probe done in ${((performance.now() - t0) / 1000).toFixed(1)} s`);
    } catch (e) {
      status(`probe failed: ${e}`);
    }
  }, 20);
}

async function main() {
  await init();
  for (const id of ["pl", "ps", "steps", "seed"]) {
    $(id).addEventListener("input", redrawPrices);
  }
  $("run-btn").addEventListener("click", runSimulation);
  $("probe-btn").addEventListener("click", runProbe);
  redrawPrices();
}

main().catch((e) => status(`failed to load wasm module: ${e}`));
