import init, { Demo } from "./pkg/mpp_wasm.js";

// types drawn; the truncations are large enough for the default parameters
const SHOWN = 8;
const M_PATH = 40;
const M_EQ = 60;
const POINTS = 201;
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

const canvas = document.getElementById("plot");
const ctx = canvas.getContext("2d");
const status = document.getElementById("status");
const legend = document.getElementById("legend");

const num = (id) => Number(document.getElementById(id).value);

function model() {
  return new Demo(num("b"), num("d"), num("c"), num("gamma"), num("rho"), num("kappa"));
}

function say(text, err = false) {
  status.textContent = text;
  status.className = err ? "err" : "";
}

function frame(xmax, ymax, xlabel) {
  const w = canvas.width, h = canvas.height, pad = 70;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#444";
  ctx.lineWidth = 2;
  ctx.strokeRect(pad, 20, w - pad - 20, h - pad - 20);
  ctx.fillStyle = "#444";
  ctx.font = "24px system-ui";
  for (let k = 0; k <= 4; k++) {
    const y = ymax * k / 4;
    ctx.fillText(y.toFixed(2), 5, h - pad - (h - pad - 20) * k / 4 + 8);
    const x = xmax * k / 4;
    ctx.fillText(x.toFixed(1), pad + (w - pad - 20) * k / 4 - 12, h - pad + 30);
  }
  ctx.fillText(xlabel, w / 2, h - 10);
  return {
    x: (v) => pad + (w - pad - 20) * v / xmax,
    y: (v) => h - pad - (h - pad - 20) * v / ymax,
  };
}

function curve(map, ts, ys, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 3;
  ctx.setLineDash(dash);
  ctx.beginPath();
  ts.forEach((t, k) => (k ? ctx.lineTo(map.x(t), map.y(ys[k])) : ctx.moveTo(map.x(t), map.y(ys[k]))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function column(rows, width, j) {
  const out = [];
  for (let k = j; k < rows.length; k += width) out.push(rows[k]);
  return out;
}

function showLegend(extra = "") {
  legend.innerHTML = COLORS.slice(0, SHOWN)
    .map((c, j) => `<span style="color:${c}">&#9632; j = ${j}</span>`)
    .join("") + extra;
}

function timed(label, f) {
  say(`${label}…`);
  // let the status repaint before the (synchronous) computation
  setTimeout(() => {
    const t0 = performance.now();
    try {
      f();
      say(`${label}: ${(performance.now() - t0).toFixed(0)} ms`);
    } catch (e) {
      say(String(e.message ?? e), true);
    }
  }, 10);
}

function plotMeanField(withPath) {
  const demo = model();
  const T = num("T");
  const ts = Array.from({ length: POINTS }, (_, k) => T * k / (POINTS - 1));
  const mf = demo.meanfield(T, POINTS, M_PATH);
  const path = withPath ? demo.simulate(num("N"), T, POINTS, M_PATH, num("seed")) : null;
  let ymax = 0;
  for (let j = 0; j < SHOWN; j++) {
    for (const v of column(mf, M_PATH + 1, j)) ymax = Math.max(ymax, v);
    if (path) for (const v of column(path, M_PATH + 1, j)) ymax = Math.max(ymax, v);
  }
  const map = frame(T, Math.min(1, ymax * 1.1), "time");
  for (let j = 0; j < SHOWN; j++) {
    if (path) curve(map, ts, column(path, M_PATH + 1, j), COLORS[j]);
    curve(map, ts, column(mf, M_PATH + 1, j), COLORS[j], path ? [12, 8] : []);
  }
  showLegend(path ? "<span>solid: simulation, dashed: mean field</span>" : "");
  demo.free();
}

function plotEquilibrium() {
  const demo = model();
  const n = num("N");
  const rows = demo.equilibrium(M_EQ);
  const x = rows.slice(0, M_EQ + 1);
  const v = rows.slice(M_EQ + 1);
  const shown = 15;
  const sd = v.map((s) => 2 * Math.sqrt(Math.max(s, 0) / n));
  const ymax = Math.max(...x.slice(0, shown).map((xi, j) => xi + sd[j])) * 1.1;
  const map = frame(shown, ymax, "patch size j");
  const bw = (map.x(1) - map.x(0)) * 0.6;
  for (let j = 0; j < shown; j++) {
    const cx = map.x(j + 0.5);
    ctx.fillStyle = "#9ecae1";
    ctx.fillRect(cx - bw / 2, map.y(x[j]), bw, map.y(0) - map.y(x[j]));
    ctx.strokeStyle = "#08519c";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx, map.y(Math.max(0, x[j] - sd[j])));
    ctx.lineTo(cx, map.y(x[j] + sd[j]));
    ctx.stroke();
  }
  legend.innerHTML = `<span>bars: equilibrium density; whiskers: &plusmn;2&radic;(&Sigma;<sub>jj</sub>/N) for N = ${n}; w = ${demo.growth_bound.toFixed(3)}</span>`;
  demo.free();
}

await init();
document.getElementById("run-mf").onclick = () => timed("mean field", () => plotMeanField(false));
document.getElementById("run-ssa").onclick = () => timed("simulation", () => plotMeanField(true));
document.getElementById("run-eq").onclick = () => timed("equilibrium", plotEquilibrium);
timed("mean field", () => plotMeanField(false));
