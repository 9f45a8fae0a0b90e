export type Method = "gan" | "fft_dec" | "plain";

export interface SampleRef {
  dataset: string;
  index: number;
  seed: number;
  res: number;
}

export interface ImageRef {
  image_b64?: string;
  sample?: SampleRef;
}

export interface InvertRequest {
  image: ImageRef;
  model_id?: string;
  layer: string;
  method: Method;
  stitch_id?: string;
  seed: number;
  steps?: number;
}

export interface InvertResponse {
  image_png_b64: string;
  wall_time_ms: number;
  metrics?: Record<string, number> | null;
  request: Record<string, unknown>;
  loss_trace?: number[];
}

export interface LayerEntry {
  layer_name: string;
  role: string;
  sampling_distance: number;
  channels: number;
  height: number;
  width: number;
}

export interface ModelInfo {
  model_id: string;
  kind: string;
  family: string;
  roles: string[];
}

export interface StitchInfo {
  stitch_id: string;
  source: { model_id: string; layer_name: string };
  target: { model_id: string; layer_name: string };
  trained_samples: number;
  best_epoch?: number | null;
}

export interface ReportSummary {
  run_id: string;
  created_at?: string | null;
  methods: { name: string }[];
  dataset_size?: number | null;
}

export interface SweepRow {
  delta: number;
  metric: string;
  layer_y: string;
  absolute: number;
  relative: number;
}

export interface JobEvent {
  event: string;
  data: Record<string, unknown>;
}

export interface ProgressData {
  step: number;
  loss: number;
  image_png_b64?: string;
}
