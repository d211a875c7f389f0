export interface HandoverParams {
  stiffness: number;
  damping: number;
  forecast_time: number;
  release_force: number;
}

export interface Rollout {
  t: number[];
  target: number[][];
  ee: number[][];
  receiver: number[][];
  receiver_t: number[];
  release_t: number | null;
  released: boolean;
  tracking_rmse: number;
  max_force: number;
  scenario: string;
  params: HandoverParams;
}

export interface QuerySide {
  action_index: number;
  params: HandoverParams;
  rollout_id: string | null;
  rollout?: Rollout;
}

export interface Query {
  id: number;
  a: QuerySide;
  b: QuerySide;
}

export interface PosteriorSummary {
  mean_min: number;
  mean_max: number;
  n_records: number;
  top_indices: number[];
  mean_sha256: string;
}

export interface HistoryEntry {
  iteration: number;
  winner: number;
  loser: number;
}

export interface SessionState {
  session_id: string;
  iteration: number;
  budget: number;
  done: boolean;
  query?: Query;
  incumbent?: HandoverParams;
  incumbent_index?: number;
  history?: HistoryEntry[];
  posterior_summary?: PosteriorSummary;
}

export type Choice = "a" | "b";
