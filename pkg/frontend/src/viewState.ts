/** Pure view-state logic: transforms, selection, history, export.
 *
 * Displayed keypoints are always the last server response; the view never
 * computes predictions locally.
 */

export interface Point {
  x: number;
  y: number;
}

export interface Transform {
  scale: number; // screen px per image px
  offsetX: number;
  offsetY: number;
}

export interface RevisionEntry {
  step: number;
  keypoint: number;
  clicked: Point;
  /** positions before -> after for every keypoint the server moved */
  moved: { index: number; from: Point; to: Point }[];
}

export interface ViewState {
  sessionId: string;
  k: number;
  imageSize: [number, number];
  keypoints: number[][];
  selected: number | null;
  corrected: Set<number>;
  history: RevisionEntry[];
  transform: Transform;
  step: number;
}

export function initialViewState(
  sessionId: string,
  k: number,
  imageSize: [number, number],
  keypoints: number[][],
): ViewState {
  return {
    sessionId,
    k,
    imageSize,
    keypoints: keypoints.map((p) => [...p]),
    selected: null,
    corrected: new Set(),
    history: [],
    transform: { scale: 1, offsetX: 0, offsetY: 0 },
    step: 0,
  };
}

export function imageToScreen(t: Transform, p: Point): Point {
  return { x: p.x * t.scale + t.offsetX, y: p.y * t.scale + t.offsetY };
}

export function screenToImage(t: Transform, p: Point): Point {
  return { x: (p.x - t.offsetX) / t.scale, y: (p.y - t.offsetY) / t.scale };
}

export function zoomAt(t: Transform, screenPoint: Point, factor: number): Transform {
  // keep the image point under the cursor fixed while zooming
  const pivot = screenToImage(t, screenPoint);
  const scale = Math.min(Math.max(t.scale * factor, 0.1), 50);
  return {
    scale,
    offsetX: screenPoint.x - pivot.x * scale,
    offsetY: screenPoint.y - pivot.y * scale,
  };
}

export function pan(t: Transform, dx: number, dy: number): Transform {
  return { ...t, offsetX: t.offsetX + dx, offsetY: t.offsetY + dy };
}

/** Index of the nearest keypoint within `radius` screen px, or null. */
export function hitTest(state: ViewState, screenPoint: Point, radius = 8): number | null {
  let best: number | null = null;
  let bestDist = radius;
  state.keypoints.forEach(([x, y], i) => {
    const s = imageToScreen(state.transform, { x, y });
    const d = Math.hypot(s.x - screenPoint.x, s.y - screenPoint.y);
    if (d <= bestDist) {
      best = i;
      bestDist = d;
    }
  });
  return best;
}

/** Fold a click response into the state, recording which points moved. */
export function applyServerRevision(
  state: ViewState,
  keypoint: number,
  clicked: Point,
  newKeypoints: number[][],
  step: number,
  moveThreshold = 1e-6,
): ViewState {
  const moved: RevisionEntry["moved"] = [];
  state.keypoints.forEach(([x, y], i) => {
    const [nx, ny] = newKeypoints[i];
    if (Math.hypot(nx - x, ny - y) > moveThreshold) {
      moved.push({ index: i, from: { x, y }, to: { x: nx, y: ny } });
    }
  });
  const corrected = new Set(state.corrected);
  corrected.add(keypoint);
  return {
    ...state,
    keypoints: newKeypoints.map((p) => [...p]),
    corrected,
    history: [...state.history, { step, keypoint, clicked, moved }],
    step,
    selected: null,
  };
}

export function applyServerUndo(
  state: ViewState,
  newKeypoints: number[][],
  step: number,
): ViewState {
  const history = state.history.slice(0, -1);
  const corrected = new Set<number>();
  history.forEach((h) => corrected.add(h.keypoint));
  return {
    ...state,
    keypoints: newKeypoints.map((p) => [...p]),
    corrected,
    history,
    step,
    selected: null,
  };
}

/** Manifest-record style export of the current annotation. */
export function exportAnnotations(state: ViewState): string {
  return JSON.stringify(
    {
      session_id: state.sessionId,
      k: state.k,
      image_size: state.imageSize,
      coords: state.keypoints.map((p) => [p[0], p[1]]),
      corrected: [...state.corrected].sort((a, b) => a - b),
      trace: state.history.map((h) => ({
        step: h.step,
        keypoint: h.keypoint,
        x: h.clicked.x,
        y: h.clicked.y,
      })),
    },
    null,
    2,
  );
}
