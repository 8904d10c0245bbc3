(function () {
  "use strict";
  var host = document.getElementById("shield-viewer");
  var data;
  try {
    data = JSON.parse(document.getElementById("shield-graph").textContent);
    if (!Array.isArray(data.nodes) || !Array.isArray(data.edges)) throw new Error("bad schema");
  } catch (e) {
    host.textContent = "Graph could not be loaded: " + e.message;
    host.style.color = "#b00";
    return;
  }
  var NS = "http://www.w3.org/2000/svg";
  var W = 900, H = 640, PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79"];
  var n = data.nodes.length;

  // seeded initial layout on a circle, then a fixed number of force steps
  var seed = 42;
  function rand() { seed = (seed * 1103515245 + 12345) % 2147483648; return seed / 2147483648; }
  var pos = data.nodes.map(function (_, i) {
    var a = 2 * Math.PI * i / Math.max(n, 1);
    return [W / 2 + 0.35 * W * Math.cos(a) + 10 * rand(), H / 2 + 0.35 * H * Math.sin(a) + 10 * rand()];
  });
  var maxW = data.edges.reduce(function (m, e) { return Math.max(m, e.weight); }, 0) || 1;
  for (var it = 0; it < 200; it++) {
    var f = pos.map(function () { return [0, 0]; });
    for (var i = 0; i < n; i++) for (var j = i + 1; j < n; j++) {
      var dx = pos[i][0] - pos[j][0], dy = pos[i][1] - pos[j][1], d2 = dx * dx + dy * dy + 0.01;
      var r = 800 / d2;
      f[i][0] += r * dx; f[i][1] += r * dy; f[j][0] -= r * dx; f[j][1] -= r * dy;
    }
    data.edges.forEach(function (e) {
      var a = pos[e.source], b = pos[e.target], k = 0.02 * e.weight / maxW;
      var dx = b[0] - a[0], dy = b[1] - a[1];
      f[e.source][0] += k * dx; f[e.source][1] += k * dy;
      f[e.target][0] -= k * dx; f[e.target][1] -= k * dy;
    });
    for (i = 0; i < n; i++) {
      pos[i][0] += 0.01 * (W / 2 - pos[i][0]) + Math.max(-5, Math.min(5, f[i][0]));
      pos[i][1] += 0.01 * (H / 2 - pos[i][1]) + Math.max(-5, Math.min(5, f[i][1]));
    }
  }

  var size = data.nodes.map(function (d) {
    var v = d.ic_lower === null || d.ic_lower === undefined ? d.node_weight : Math.max(d.ic_lower, 0);
    return v;
  });
  var maxSize = Math.max.apply(null, size.concat([1e-12]));

  var controls = document.createElement("div");
  var slider = document.createElement("input");
  slider.type = "range"; slider.min = 0; slider.max = maxW; slider.step = maxW / 200; slider.value = 0;
  var counter = document.createElement("span");
  controls.appendChild(document.createTextNode("Edge weight threshold "));
  controls.appendChild(slider);
  controls.appendChild(counter);
  host.appendChild(controls);

  var svg = document.createElementNS(NS, "svg");
  svg.setAttribute("width", W); svg.setAttribute("height", H);
  host.appendChild(svg);
  var panel = document.createElement("pre");
  host.appendChild(panel);

  var lines = data.edges.map(function (e) {
    var l = document.createElementNS(NS, "line");
    l.setAttribute("x1", pos[e.source][0]); l.setAttribute("y1", pos[e.source][1]);
    l.setAttribute("x2", pos[e.target][0]); l.setAttribute("y2", pos[e.target][1]);
    l.setAttribute("stroke", "#999"); l.setAttribute("stroke-width", 0.5 + 2.5 * e.weight / maxW);
    svg.appendChild(l);
    return l;
  });
  data.nodes.forEach(function (d, i) {
    var c = document.createElementNS(NS, "circle");
    c.setAttribute("cx", pos[i][0]); c.setAttribute("cy", pos[i][1]);
    c.setAttribute("r", 4 + 14 * size[i] / maxSize);
    c.setAttribute("fill", d.cluster === null ? "#9e9e9e" : PALETTE[d.cluster % PALETTE.length]);
    c.addEventListener("click", function () {
      panel.textContent = [
        "PT: " + d.pt,
        "Cluster: " + d.label,
        "Incidence: " + d.incidence.map(function (a) { return a.c + "/" + a.n; }).join(", "),
        "Fold change: " + (d.fold_change === null ? "n/a" : d.fold_change.toFixed(2)),
        "IC lower: " + (d.ic_lower === null ? "n/a" : d.ic_lower.toFixed(3))
      ].join("\n");
    });
    var t = document.createElementNS(NS, "title");
    t.textContent = d.pt;
    c.appendChild(t);
    svg.appendChild(c);
  });

  function update() {
    var t = parseFloat(slider.value), shown = 0;
    data.edges.forEach(function (e, k) {
      var on = e.weight >= t;
      lines[k].style.display = on ? "" : "none";
      if (on) shown++;
    });
    counter.textContent = " " + shown + " / " + data.edges.length + " edges, " + n + " nodes";
  }
  slider.addEventListener("input", update);
  update();
})();
