// Vanilla glue: read the sliders, call the wasm exports, draw on canvases.
import init, { demo_flock, demo_region, demo_energy } from "./pkg/swarm_demo.js";

const $ = (id) => document.getElementById(id);

// tab switching
document.querySelectorAll("nav button").forEach((b) => {
  b.onclick = () => {
    document.querySelectorAll("nav button").forEach((x) => x.classList.remove("active"));
    document.querySelectorAll("section").forEach((s) => s.classList.remove("visible"));
    b.classList.add("active");
    $(b.dataset.tab).classList.add("visible");
  };
});

// live slider labels
document.querySelectorAll("input[type=range]").forEach((r) => {
  const label = r.nextElementSibling;
  const update = () => { if (label) label.textContent = " " + r.value; };
  r.oninput = update;
  update();
});

function parse(json, statusEl) {
  const data = JSON.parse(json);
  if (data.error) {
    statusEl.textContent = "error: " + data.error;
    return null;
  }
  return data;
}

function frame(points) {
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const [x, y] of points) {
    xmin = Math.min(xmin, x); xmax = Math.max(xmax, x);
    ymin = Math.min(ymin, y); ymax = Math.max(ymax, y);
  }
  const px = (xmax - xmin) * 0.05 + 1e-9, py = (ymax - ymin) * 0.05 + 1e-9;
  return [xmin - px, xmax + px, ymin - py, ymax + py];
}

function mapper(canvas, [xmin, xmax, ymin, ymax]) {
  const w = canvas.width, h = canvas.height;
  return ([x, y]) => [((x - xmin) / (xmax - xmin)) * w, h - ((y - ymin) / (ymax - ymin)) * h];
}

function agentColor(i, n) {
  return `hsl(${Math.round((360 * i) / n)} 70% 45%)`;
}

// trajectories of 2-d agents: one colored path per agent
function drawTrajectories(canvas, positions, highlight) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const n = positions[0].length / 2;
  const all = [];
  for (const snap of positions)
    for (let i = 0; i < n; i++) all.push([snap[2 * i], snap[2 * i + 1]]);
  const m = mapper(canvas, frame(all));
  for (let i = 0; i < n; i++) {
    ctx.beginPath();
    ctx.strokeStyle = agentColor(i, n);
    ctx.lineWidth = highlight === i ? 2.5 : 1.2;
    positions.forEach((snap, k) => {
      const [px, py] = m([snap[2 * i], snap[2 * i + 1]]);
      if (k === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
    });
    ctx.stroke();
    const last = positions[positions.length - 1];
    const [px, py] = m([last[2 * i], last[2 * i + 1]]);
    ctx.beginPath();
    ctx.fillStyle = agentColor(i, n);
    ctx.arc(px, py, 3.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

// log-scale decay curves with an optional event marker
function drawCurves(canvas, times, series, entry) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const floor = 1e-12;
  const pts = [];
  for (const { values } of series)
    times.forEach((t, k) => pts.push([t, Math.log10(Math.max(values[k], floor))]));
  const box = frame(pts);
  const m = mapper(canvas, box);
  ctx.strokeStyle = "#8886";
  ctx.strokeRect(0, 0, canvas.width, canvas.height);
  for (const { values, color, label } of series) {
    ctx.beginPath();
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.8;
    times.forEach((t, k) => {
      const [px, py] = m([t, Math.log10(Math.max(values[k], floor))]);
      if (k === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
    });
    ctx.stroke();
    const [lx, ly] = m([times[Math.floor(times.length / 3)],
      Math.log10(Math.max(values[Math.floor(times.length / 3)], floor))]);
    ctx.fillStyle = color;
    ctx.fillText(label, lx + 4, ly - 4);
  }
  if (entry != null) {
    ctx.strokeStyle = "#888";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    const [ex] = m([entry, box[2]]);
    ctx.moveTo(ex, 0); ctx.lineTo(ex, canvas.height);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#888";
    ctx.fillText("region entry", ex + 4, 12);
  }
}

$("f-run").onclick = () => {
  const status = $("f-status");
  status.textContent = "running...";
  setTimeout(() => {
    const t0 = performance.now();
    const out = demo_flock(JSON.stringify({
      n: +$("f-n").value, seed: +$("f-seed").value,
      x0: +$("f-x0").value, v0: +$("f-v0").value,
      law: $("f-law").value, strength: +$("f-strength").value,
      radius: +$("f-radius").value, t_end: 25,
    }));
    const data = parse(out, status);
    if (!data) return;
    const last = data.active_agent.findLast ? data.active_agent.findLast((a) => a >= 0) : -1;
    drawTrajectories($("f-traj"), data.positions, last);
    drawCurves($("f-decay"), data.times, [
      { values: data.v_spread, color: "#d33", label: "velocity spread V(t)" },
      { values: data.x_spread, color: "#36c", label: "position spread X(t)" },
      { values: data.control_norms, color: "#2a2", label: "control magnitude" },
    ], data.region_entry_time);
    const entry = data.region_entry_time;
    status.textContent =
      (entry != null ? `entered the consensus region at t = ${entry.toFixed(2)}` : "no region entry") +
      ` — ${(performance.now() - t0).toFixed(0)} ms`;
  }, 20);
};

$("r-run").onclick = () => {
  const status = $("r-status");
  status.textContent = "mapping (this sweeps every cell)...";
  setTimeout(() => {
    const t0 = performance.now();
    const out = demo_region(JSON.stringify({
      n: +$("r-n").value, seed: +$("r-seed").value,
      law: $("r-law").value, radius: +$("r-radius").value,
      cells: +$("r-cells").value, trials: +$("r-trials").value,
      t_end: 60,
    }));
    const data = parse(out, status);
    if (!data) return;
    const canvas = $("r-map");
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const nx = data.x0_axis.length, nv = data.v0_axis.length;
    const xmax = data.x0_axis[nx - 1], vmax = data.v0_axis[nv - 1];
    const m = mapper(canvas, [0, xmax, 0, vmax]);
    const cw = canvas.width / nx, ch = canvas.height / nv;
    for (let iv = 0; iv < nv; iv++) {
      for (let ix = 0; ix < nx; ix++) {
        const p = data.probability[iv * nx + ix];
        ctx.fillStyle = `hsl(${Math.round(240 - 240 * p)} 70% ${30 + 35 * p}%)`;
        const [cx, cy] = m([data.x0_axis[ix], data.v0_axis[iv]]);
        ctx.fillRect(cx - cw / 2, cy - ch / 2, cw + 1, ch + 1);
      }
    }
    // certified boundary
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 2.5;
    ctx.beginPath();
    let started = false;
    data.x0_axis.forEach((x0, ix) => {
      const b = data.boundary[ix];
      if (b == null) return;
      const [px, py] = m([x0, Math.min(b, vmax)]);
      if (!started) { ctx.moveTo(px, py); started = true; } else ctx.lineTo(px, py);
    });
    ctx.stroke();
    // empirical contour
    ctx.strokeStyle = "#000";
    ctx.lineWidth = 1.5;
    for (const line of data.contours) {
      ctx.beginPath();
      line.forEach(([x, v], k) => {
        const [px, py] = m([x, v]);
        if (k === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
      });
      ctx.stroke();
    }
    status.textContent =
      `white: certified boundary, black: empirical 80% contour — ${(performance.now() - t0).toFixed(0)} ms`;
  }, 20);
};

$("e-run").onclick = () => {
  const status = $("e-status");
  status.textContent = "running...";
  setTimeout(() => {
    const t0 = performance.now();
    const out = demo_energy(JSON.stringify({
      n: +$("e-n").value, seed: +$("e-seed").value,
      kernel_beta: +$("e-beta").value, repulsion_p: +$("e-p").value,
      m: +$("e-m").value, controlled: $("e-on").checked, t_end: 20,
    }));
    const data = parse(out, status);
    if (!data) return;
    drawTrajectories($("e-traj"), data.positions, -1);
    const th = data.threshold;
    const thSeries = data.times.map(() => th ?? NaN);
    drawCurves($("e-profile"), data.times, [
      { values: data.energy, color: "#d33", label: "total energy" },
      { values: data.kinetic, color: "#2a2", label: "kinetic" },
      { values: data.attraction, color: "#c6a", label: "attraction" },
      { values: data.repulsion, color: "#36c", label: "repulsion" },
      ...(th ? [{ values: thSeries, color: "#888", label: "critical level" }] : []),
    ], data.region_entry_time);
    const entry = data.region_entry_time;
    status.textContent =
      (entry != null ? `energy crossed the critical level at t = ${entry.toFixed(2)}` : "energy stayed above the critical level") +
      ` — ${(performance.now() - t0).toFixed(0)} ms`;
  }, 20);
};

await init();
$("f-run").click();
