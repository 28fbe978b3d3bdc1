/** Frame clock driving the viewport from the decoded animation buffer. */

import type { StudioController } from "./state";
import type { Viewport } from "./viewport";

export function startRenderLoop(
  controller: StudioController,
  viewport: Viewport,
  onFrame: (frame: number, total: number) => void,
): void {
  let lastResult: unknown = null;
  let lastUploaded = -1;
  let lastTime = performance.now();
  let accumulator = 0;

  const tick = (now: number) => {
    const state = controller.state;
    const result = state.result;
    if (result) {
      if (result !== lastResult) {
        viewport.setResult(result);
        lastResult = result;
        lastUploaded = 0;
        accumulator = 0;
      }
      const dt = (now - lastTime) / 1000;
      if (state.playing && result.frames > 1) {
        accumulator += dt;
        const step = 1 / result.fps;
        while (accumulator >= step) {
          accumulator -= step;
          state.frameIndex = (state.frameIndex + 1) % result.frames;
        }
      }
      if (state.frameIndex !== lastUploaded) {
        viewport.uploadFrame(result, state.frameIndex);
        lastUploaded = state.frameIndex;
      }
      onFrame(state.frameIndex, result.frames);
    }
    lastTime = now;
    viewport.draw();
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}
