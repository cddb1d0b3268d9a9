/** Canvas rendering of the image, markers, and revision arrows. */

import { ViewState, imageToScreen } from "./viewState.js";

export const COLORS = {
  model: "#3aa0ff", // model-placed points
  corrected: "#ff9f1c", // user-corrected (pinned) points
  selected: "#ff3b6b",
  arrow: "#7CFC00",
};

export function render(
  ctx: CanvasRenderingContext2D,
  state: ViewState,
  image: CanvasImageSource | null,
): void {
  const canvas = ctx.canvas;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const t = state.transform;
  if (image) {
    ctx.save();
    ctx.setTransform(t.scale, 0, 0, t.scale, t.offsetX, t.offsetY);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(image, 0, 0);
    ctx.restore();
  }

  // revision arrows from the latest server revision
  const last = state.history[state.history.length - 1];
  if (last) {
    ctx.strokeStyle = COLORS.arrow;
    ctx.lineWidth = 1.5;
    for (const m of last.moved) {
      const from = imageToScreen(t, m.from);
      const to = imageToScreen(t, m.to);
      ctx.beginPath();
      ctx.moveTo(from.x, from.y);
      ctx.lineTo(to.x, to.y);
      ctx.stroke();
    }
  }

  state.keypoints.forEach(([x, y], i) => {
    const p = imageToScreen(t, { x, y });
    ctx.beginPath();
    ctx.arc(p.x, p.y, i === state.selected ? 7 : 5, 0, 2 * Math.PI);
    ctx.fillStyle =
      i === state.selected
        ? COLORS.selected
        : state.corrected.has(i)
          ? COLORS.corrected
          : COLORS.model;
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1;
    ctx.stroke();
    ctx.fillStyle = "#ffffff";
    ctx.font = "10px sans-serif";
    ctx.fillText(String(i), p.x + 7, p.y - 7);
  });
}
