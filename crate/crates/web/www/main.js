import init, { simulate, attack, check } from "../pkg/ebbflow_web.js";

const $ = (id) => document.getElementById(id);

function chart(runs) {
  const svg = $("chart");
  svg.innerHTML = "";
  const rows = runs.flatMap((r) => r.slots.map((s) => ({ ...s, mode: r.mode })));
  const top = Math.max(1, ...rows.map((r) => r.ava[1] + 1));
  const h = 12, w = 800;
  svg.setAttribute("height", rows.length * h + 4);
  rows.forEach((r, i) => {
    for (const [cls, span] of [["ava", r.ava], ["fin", r.fin]]) {
      const rect = document.createElementNS("http://www.w3.org/2000/svg", "rect");
      rect.setAttribute("class", cls);
      rect.setAttribute("x", 40);
      rect.setAttribute("y", i * h + (cls === "fin" ? 3 : 0));
      rect.setAttribute("width", ((span[0] + 1) / top) * (w - 50));
      rect.setAttribute("height", cls === "fin" ? h - 6 : h - 1);
      svg.appendChild(rect);
    }
    const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
    label.setAttribute("x", 0);
    label.setAttribute("y", i * h + h - 2);
    label.setAttribute("font-size", 10);
    label.textContent = `${r.mode} ${r.slot}`;
    svg.appendChild(label);
  });
}

function verdicts(list) {
  const rows = list.map((v) => {
    const cls = v.pass ? "pass" : v.expected_fail ? "xfail" : "fail";
    const tag = v.pass ? "PASS" : v.expected_fail ? "XFAIL" : "FAIL";
    return `<tr><td class="${cls}">${tag}</td><td>${v.checker}</td><td>${v.run ?? "A/B"}</td><td style="text-align:left">${v.detail}</td></tr>`;
  });
  $("verdicts").innerHTML = `<table>${rows.join("")}</table>`;
}

function show(json) {
  const report = JSON.parse(json);
  if (report.error) {
    $("status").textContent = `error: ${report.error}`;
    return;
  }
  const blamed = report.runs.filter((r) => r.implicated).map((r) => `${r.mode}: v${r.implicated.join(" v")}`);
  $("status").textContent = (report.ok ? "all checks passed" : "some checks failed") +
    (blamed.length ? `; implicated ${blamed.join(", ")}` : "");
  chart(report.runs);
  verdicts(report.verdicts);
}

await init();
$("run").onclick = () => show(simulate($("scenario").value));
$("go").onclick = () => show(attack($("attack").value, Number($("n").value), Number($("k").value)));
$("trace").onchange = async (e) => show(check(await e.target.files[0].text()));
