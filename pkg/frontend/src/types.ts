/** Wire types mirroring the service's request/response models. */

export interface Point {
  x: number;
  y: number;
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface PaletteClass {
  id: number;
  name: string;
}

export interface TaskDescriptor {
  task_id: string;
  image_id: string;
  image_url: string;
  image_width: number;
  image_height: number;
  kind: string;
  block_rect: Rect | null;
  highlight_rect: Rect | null;
  palette: PaletteClass[];
  min_seconds: number;
}

export interface SubmissionPolygon {
  class_id: number;
  vertices: [number, number][];
}

export interface ApiSubmissionPayload {
  task_id: string;
  polygons: SubmissionPolygon[];
  active_seconds: number;
}

export interface Payout {
  base: number;
  bonus: number;
  total: number;
}

export interface VerdictResponse {
  verdict: "accepted" | "rejected";
  reason: string | null;
  payout: Payout | null;
}
