/** Browser entry point: wires file input, canvas events, and the session API. */

import { SessionClient } from "./api.js";
import { render } from "./render.js";
import {
  ViewState,
  initialViewState,
  screenToImage,
  zoomAt,
  pan,
  hitTest,
  applyServerRevision,
  applyServerUndo,
  exportAnnotations,
} from "./viewState.js";

const SERVER_URL =
  new URLSearchParams(window.location.search).get("server") ?? "http://localhost:8008";

function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      resolve(url.slice(url.indexOf(",") + 1));
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}

function loadImage(file: File): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = reject;
    img.src = URL.createObjectURL(file);
  });
}

export function setup(): void {
  const client = new SessionClient(SERVER_URL);
  const canvas = document.getElementById("canvas") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const fileInput = document.getElementById("file") as HTMLInputElement;
  const undoBtn = document.getElementById("undo") as HTMLButtonElement;
  const exportBtn = document.getElementById("export") as HTMLButtonElement;
  const statusEl = document.getElementById("status") as HTMLElement;

  let state: ViewState | null = null;
  let image: HTMLImageElement | null = null;
  let busy = false; // one request in flight at a time
  let panning: { x: number; y: number } | null = null;

  const redraw = () => state && render(ctx, state, image);
  const setStatus = (msg: string) => (statusEl.textContent = msg);
  const setBusy = (b: boolean) => {
    busy = b;
    undoBtn.disabled = b || !state;
    exportBtn.disabled = b || !state;
    canvas.style.cursor = b ? "wait" : "crosshair";
  };

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    setBusy(true);
    setStatus("uploading…");
    try {
      const [b64, img] = await Promise.all([fileToBase64(file), loadImage(file)]);
      const resp = await client.createSession(b64);
      image = img;
      state = initialViewState(resp.session_id, resp.k, resp.image_size, resp.keypoints);
      const scale = Math.min(canvas.width / img.width, canvas.height / img.height);
      state.transform = { scale, offsetX: 0, offsetY: 0 };
      setStatus(`session ${resp.session_id.slice(0, 8)} — ${resp.k} keypoints`);
      redraw();
    } catch (e) {
      setStatus(`error: ${e}`);
    } finally {
      setBusy(false);
    }
  });

  canvas.addEventListener("mousedown", (e) => {
    if (!state || busy) return;
    const rect = canvas.getBoundingClientRect();
    const sp = { x: e.clientX - rect.left, y: e.clientY - rect.top };
    if (e.button === 1 || e.shiftKey) {
      panning = sp;
      return;
    }
    const hit = hitTest(state, sp);
    if (state.selected === null) {
      // first click selects the keypoint to correct
      if (hit !== null) {
        state.selected = hit;
        setStatus(`keypoint ${hit} selected — click its true location`);
        redraw();
      }
      return;
    }
    // second click places the correction
    const target = screenToImage(state.transform, sp);
    const keypoint = state.selected;
    setBusy(true);
    setStatus(`placing keypoint ${keypoint}…`);
    client
      .applyClick(state.sessionId, keypoint, target.x, target.y)
      .then((resp) => {
        state = applyServerRevision(state!, keypoint, target, resp.keypoints, resp.step);
        const moved = state.history[state.history.length - 1].moved.length;
        setStatus(`step ${resp.step}: ${moved} point(s) revised`);
        redraw();
      })
      .catch((err) => setStatus(`error: ${err}`))
      .finally(() => setBusy(false));
  });

  canvas.addEventListener("mousemove", (e) => {
    if (!state || !panning) return;
    const rect = canvas.getBoundingClientRect();
    const sp = { x: e.clientX - rect.left, y: e.clientY - rect.top };
    state.transform = pan(state.transform, sp.x - panning.x, sp.y - panning.y);
    panning = sp;
    redraw();
  });
  canvas.addEventListener("mouseup", () => (panning = null));

  canvas.addEventListener("wheel", (e) => {
    if (!state) return;
    e.preventDefault();
    const rect = canvas.getBoundingClientRect();
    const sp = { x: e.clientX - rect.left, y: e.clientY - rect.top };
    state.transform = zoomAt(state.transform, sp, e.deltaY < 0 ? 1.2 : 1 / 1.2);
    redraw();
  });

  undoBtn.addEventListener("click", () => {
    if (!state || busy) return;
    setBusy(true);
    client
      .undo(state.sessionId)
      .then((resp) => {
        if (resp.undone) {
          state = applyServerUndo(state!, resp.keypoints, resp.step);
          setStatus(`undid last click (step ${resp.step})`);
        } else {
          setStatus("nothing to undo");
        }
        redraw();
      })
      .catch((err) => setStatus(`error: ${err}`))
      .finally(() => setBusy(false));
  });

  exportBtn.addEventListener("click", () => {
    if (!state) return;
    const blob = new Blob([exportAnnotations(state)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "annotations.json";
    a.click();
  });

  window.addEventListener("keydown", (e) => {
    if (e.key === "Escape" && state) {
      state.selected = null;
      setStatus("selection cleared");
      redraw();
    }
  });

  setBusy(false);
}

if (typeof document !== "undefined" && document.getElementById("canvas")) {
  setup();
}
