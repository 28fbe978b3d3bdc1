import { ApiClient } from "./api";
import { EmbedMap } from "./embedMap";
import { startRenderLoop } from "./playback";
import { SLIDER_MAX, SLIDER_MIN, SLIDER_STEP, StudioController } from "./state";
import { Viewport } from "./viewport";
import "./style.css";

const AUTO_GENERATE_DEBOUNCE_MS = 400;

const app = document.getElementById("app")!;
app.innerHTML = `
  <header>
    <h1>emotion editing studio</h1>
    <div id="status" class="status"></div>
  </header>
  <div class="layout">
    <aside class="panel">
      <section>
        <h2>base emotion</h2>
        <div id="bases" class="bases"></div>
      </section>
      <section>
        <h2>edit directions</h2>
        <div id="sliders"></div>
      </section>
      <section>
        <label>seed <input id="seed" type="number" value="0" /></label>
        <label class="auto"><input id="auto" type="checkbox" /> auto-generate</label>
        <button id="generate">Generate</button>
        <button id="reset" class="secondary">Reset sliders</button>
      </section>
      <section>
        <h2>embedding map</h2>
        <canvas id="map" width="280" height="220"></canvas>
      </section>
    </aside>
    <main class="stage">
      <canvas id="viewport"></canvas>
      <div class="transport">
        <button id="play">⏸</button>
        <input id="scrub" type="range" min="0" max="0" step="1" value="0" />
        <span id="frameinfo">–</span>
      </div>
      <div id="error" class="error hidden"></div>
    </main>
  </div>
`;

const statusEl = document.getElementById("status")!;
const basesEl = document.getElementById("bases")!;
const slidersEl = document.getElementById("sliders")!;
const errorEl = document.getElementById("error")!;
const scrubEl = document.getElementById("scrub") as HTMLInputElement;
const playEl = document.getElementById("play") as HTMLButtonElement;
const frameInfoEl = document.getElementById("frameinfo")!;
const seedEl = document.getElementById("seed") as HTMLInputElement;
const autoEl = document.getElementById("auto") as HTMLInputElement;

const api = new ApiClient("");
const controller = new StudioController(api);
const viewport = new Viewport(document.getElementById("viewport") as HTMLCanvasElement);
const embedMap = new EmbedMap(document.getElementById("map") as HTMLCanvasElement);

let autoTimer: ReturnType<typeof setTimeout> | null = null;

function scheduleAutoGenerate(): void {
  if (!autoEl.checked) return;
  if (autoTimer) clearTimeout(autoTimer);
  autoTimer = setTimeout(() => {
    controller.generate().catch(() => undefined);
  }, AUTO_GENERATE_DEBOUNCE_MS);
}

function rebuildControls(): void {
  basesEl.innerHTML = "";
  controller.state.classNames.forEach((name) => {
    const btn = document.createElement("button");
    btn.textContent = name;
    btn.className = name === controller.state.baseLabel ? "base active" : "base";
    btn.onclick = () => {
      controller.selectBase(name);
      controller.refreshEdited().catch(() => undefined);
      scheduleAutoGenerate();
    };
    basesEl.appendChild(btn);
  });

  slidersEl.innerHTML = "";
  controller.state.classNames.forEach((name, k) => {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = `α · ${name}`;
    const value = document.createElement("span");
    value.textContent = controller.state.sliders[k].toFixed(2);
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(SLIDER_MIN);
    input.max = String(SLIDER_MAX);
    input.step = String(SLIDER_STEP);
    input.value = String(controller.state.sliders[k]);
    input.oninput = () => {
      controller.setSlider(k, parseFloat(input.value));
      value.textContent = controller.state.sliders[k].toFixed(2);
      controller.refreshEdited().catch(() => undefined);
      scheduleAutoGenerate();
    };
    row.append(label, input, value);
    slidersEl.appendChild(row);
  });
}

function render(): void {
  const s = controller.state;
  statusEl.textContent = s.busy ? "generating…" : s.result ? "ready" : "idle";
  statusEl.classList.toggle("busy", s.busy);
  if (s.error) {
    errorEl.textContent = `error: ${s.error}`;
    errorEl.classList.remove("hidden");
  } else {
    errorEl.classList.add("hidden");
  }
  const shown = s.editedEmbedding ?? s.baseEmbedding;
  embedMap.draw(shown, s.baseLabel);
  playEl.textContent = s.playing ? "⏸" : "▶";
  document.querySelectorAll<HTMLButtonElement>(".base").forEach((b) => {
    b.classList.toggle("active", b.textContent === s.baseLabel);
  });
}

controller.onChange = render;

document.getElementById("generate")!.onclick = () => {
  controller.generate().catch(() => undefined);
};
document.getElementById("reset")!.onclick = () => {
  controller.resetSliders();
  rebuildControls();
  controller.refreshEdited().catch(() => undefined);
  scheduleAutoGenerate();
};
seedEl.onchange = () => {
  controller.state.seed = parseInt(seedEl.value || "0", 10);
  scheduleAutoGenerate();
};
playEl.onclick = () => {
  controller.state.playing = !controller.state.playing;
  render();
};
scrubEl.oninput = () => {
  controller.state.playing = false;
  controller.seek(parseInt(scrubEl.value, 10));
};

startRenderLoop(controller, viewport, (frame, total) => {
  scrubEl.max = String(total - 1);
  if (!controller.state.playing) return;
  scrubEl.value = String(frame);
  frameInfoEl.textContent = `${frame + 1}/${total}`;
});

async function boot(): Promise<void> {
  statusEl.textContent = "loading dictionary…";
  try {
    await controller.loadDictionary();
    embedMap.setCentroids(controller.state.centroids, controller.state.classNames);
    rebuildControls();
    await controller.refreshEdited();
    render();
    statusEl.textContent = "idle";
  } catch (err) {
    errorEl.innerHTML = `service unreachable: ${err instanceof Error ? err.message : err} <button id="retry">retry</button>`;
    errorEl.classList.remove("hidden");
    document.getElementById("retry")!.onclick = () => {
      errorEl.classList.add("hidden");
      boot();
    };
  }
}

boot();
