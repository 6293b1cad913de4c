/** Payload shapes of the labeling service's /api endpoints. */

export interface HunkPayload {
  old_start: number;
  new_start: number;
  added: string[];
  deleted: string[];
  modified: [string, string][];
}

export interface FilePayload {
  path: string;
  is_add: boolean;
  is_delete: boolean;
  hunks: HunkPayload[];
}

export interface ClusterProgress {
  cluster: number;
  done: number;
  total: number;
}

export interface Task {
  change_id: string;
  cluster: number;
  message: string;
  author: string;
  timestamp: number;
  files: FilePayload[];
  metrics: Record<string, number>;
  classes: string[];
  progress: ClusterProgress[];
}

export interface SessionInfo {
  classes: string[];
  noop_class: string;
  k: number;
  representatives: number;
  progress: ClusterProgress[];
  experts: string[];
}

export interface TallyCluster {
  cluster: number;
  labels: Record<string, number>;
  leader: string | null;
  tied: boolean;
}

export interface Tally {
  clusters: TallyCluster[];
}

export type FinalizeResult =
  | { ok: true; mapping: Record<string, string> }
  | { ok: false; unresolved: number[] };
