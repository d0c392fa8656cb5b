import init, { doubleDescent, softProjection, pcaHeatmap } from "./pkg/subplane_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guarded(target, fn) {
  try {
    target.innerHTML = fn();
  } catch (e) {
    target.textContent = `error: ${e.message ?? e}`;
  }
}

function later(target, fn) {
  target.textContent = "running...";
  setTimeout(() => guarded(target, fn), 10);
}

function runDoubleDescent() {
  later($("dd-plot"), () =>
    doubleDescent(num("dd-n"), num("dd-sigma"), $("dd-alphas").value, num("dd-orders"), num("dd-seed")));
}

function runProjection() {
  const alpha = num("sp-alpha");
  $("sp-alpha-out").textContent = alpha.toFixed(2);
  guarded($("sp-out"), () => {
    const before = $("sp-values").value.split(",").map(Number);
    const after = softProjection(new Float64Array(before), alpha, 0);
    const sorted = [...before].sort((a, b) => b - a);
    const rows = sorted.map((s, i) => `<tr><td>${s.toFixed(4)}</td><td>${after[i].toFixed(4)}</td></tr>`);
    const lo = Math.sqrt(Math.max(0, 1 - alpha)).toFixed(4);
    const hi = Math.sqrt(1 + alpha).toFixed(4);
    return `<p>box [${lo}, ${hi}]</p><table><tr><th>before</th><th>after</th></tr>${rows.join("")}</table>`;
  });
}

function runHeatmap() {
  later($("hm-plot"), () =>
    pcaHeatmap(num("hm-d"), num("hm-m"), num("hm-n"), num("hm-sigma"), num("hm-orders"), 0));
}

await init();
$("status").textContent = "ready";
$("dd-run").addEventListener("click", runDoubleDescent);
$("hm-run").addEventListener("click", runHeatmap);
$("sp-alpha").addEventListener("input", runProjection);
$("sp-values").addEventListener("change", runProjection);
runProjection();
