// Wires the three demo panels to the wasm exports. Build the module with
//   wasm-pack build crates/dicov-wasm --target web
// then serve the repository root and open /www/.

import init, { trial_json, beta_sweep_json, machines_sweep_json }
  from "../crates/dicov-wasm/pkg/dicov_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function parsed(text, statusId) {
  const data = JSON.parse(text);
  $(statusId).textContent = data.error ? `error: ${data.error}` : "";
  return data.error ? null : data;
}

// Diverging heatmap: blue below zero, red above, white at zero.
function drawHeatmap(canvas, matrix) {
  const ctx = canvas.getContext("2d");
  const p = matrix.length;
  const cell = Math.floor(canvas.width / p);
  const span = Math.max(...matrix.flat().map(Math.abs), 1e-12);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let i = 0; i < p; i++) {
    for (let j = 0; j < p; j++) {
      const t = matrix[i][j] / span;
      const shade = Math.round(255 * (1 - Math.abs(t)));
      ctx.fillStyle = t >= 0
        ? `rgb(255,${shade},${shade})`
        : `rgb(${shade},${shade},255)`;
      ctx.fillRect(j * cell, i * cell, cell, cell);
    }
  }
}

// Minimal line chart: series = [{label, color, points: [[x, y], ...]}].
function drawChart(canvas, series, yLabel) {
  const ctx = canvas.getContext("2d");
  const left = 52, right = 14, top = 14, bottom = 34;
  const w = canvas.width - left - right;
  const h = canvas.height - top - bottom;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const xs = series.flatMap((s) => s.points.map((q) => q[0]));
  const ys = series.flatMap((s) => s.points.map((q) => q[1]));
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1e-9);
  const sx = (x) => left + (xMax === xMin ? w / 2 : ((x - xMin) / (xMax - xMin)) * w);
  const sy = (y) => top + h - (y / yMax) * h;

  ctx.strokeStyle = "#c9cfdb";
  ctx.fillStyle = "#55607a";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(left, top); ctx.lineTo(left, top + h); ctx.lineTo(left + w, top + h);
  ctx.stroke();
  for (let k = 0; k <= 4; k++) {
    const y = (yMax * k) / 4;
    ctx.fillText(y.toPrecision(3), 4, sy(y) + 4);
  }
  for (const x of [...new Set(xs)].sort((a, b) => a - b)) {
    ctx.fillText(String(x), sx(x) - 6, top + h + 16);
  }
  ctx.fillText(yLabel, 4, 10);

  series.forEach((s, idx) => {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    ctx.lineWidth = 1.8;
    ctx.beginPath();
    s.points.forEach(([x, y], i) =>
      i === 0 ? ctx.moveTo(sx(x), sy(y)) : ctx.lineTo(sx(x), sy(y)));
    ctx.stroke();
    s.points.forEach(([x, y]) => {
      ctx.beginPath();
      ctx.arc(sx(x), sy(y), 3, 0, 2 * Math.PI);
      ctx.fill();
    });
    ctx.fillText(s.label, left + w - 110, top + 14 * (idx + 1));
  });
}

function runRound() {
  const data = parsed(
    trial_json(num("round-p"), num("round-n"), num("round-m"),
      num("round-beta"), num("round-b"), num("round-seed")),
    "round-status");
  if (!data) return;
  drawHeatmap($("truth-canvas"), data.truth);
  drawHeatmap($("estimate-canvas"), data.estimate);
  const table = $("round-table");
  table.hidden = false;
  const body = table.tBodies[0];
  body.textContent = "";
  for (const name of ["distributed", "naive"]) {
    const m = data.metrics[name];
    const row = body.insertRow();
    row.insertCell().textContent = name;
    for (const key of ["mse", "linf", "fpr", "fnr"]) {
      row.insertCell().textContent = m[key].toPrecision(3);
    }
  }
  const budget = num("round-b");
  const used = Math.max(...data.bandwidth_used);
  $("round-note").textContent =
    `λ = ${data.lambda.toPrecision(3)}, τ = ${data.tau.toPrecision(3)}; ` +
    `busiest machine sent ${used} of ${budget} budgeted cells.`;
}

function runBetaSweep() {
  const data = parsed(
    beta_sweep_json(num("beta-p"), num("beta-n"), num("beta-m"),
      num("beta-trials"), num("beta-seed"), $("beta-list").value),
    "beta-status");
  if (!data) return;
  drawChart($("beta-canvas"), [
    { label: "median FPR", color: "#c03535",
      points: data.map((r) => [r.beta, r.fpr.median]) },
    { label: "median FNR", color: "#2a5bd7",
      points: data.map((r) => [r.beta, r.fnr.median]) },
  ], "rate");
}

function runMachinesSweep() {
  const data = parsed(
    machines_sweep_json(num("mach-p"), num("mach-n"), num("mach-trials"),
      num("mach-seed"), $("mach-list").value),
    "mach-status");
  if (!data) return;
  const colors = { distributed: "#2a5bd7", naive: "#c03535", full_debiased: "#2e8b57" };
  const names = [...new Set(data.map((r) => r.estimator))];
  drawChart($("mach-canvas"), names.map((name) => ({
    label: name,
    color: colors[name] ?? "#555",
    points: data.filter((r) => r.estimator === name)
      .map((r) => [r.machines, r.mse.median]),
  })), "median MSE");
}

await init();
$("round-run").onclick = runRound;
$("beta-run").onclick = runBetaSweep;
$("mach-run").onclick = runMachinesSweep;
runRound();
