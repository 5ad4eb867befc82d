// Wire types for the covarnet service documents.  Field names mirror the
// JSON exactly; everything here is data, no behavior.

export interface FilterParams {
  min_z?: number;
  max_p?: number;
  min_raw?: number;
  sign?: 'both' | 'positive' | 'negative';
}

export interface DatasetInfo {
  id: string;
  n: number;
  L: number;
  alphabet: string;
  gap: string;
  revision: number;
}

export interface Subnode {
  cat: string;
  weight: number;
}

export interface GraphNode {
  index: number;
  subnodes: Subnode[];
}

export interface GraphEdge {
  key: string;
  j: number;
  cat_j: string;
  k: number;
  cat_k: string;
  observed: number;
  expected: number;
  raw: number;
  z: number;
  p: number;
  state: 'normal' | 'pinned' | 'removed';
  cycle_id: number | null;
}

export interface GraphDoc {
  alphabet: string;
  gap: string;
  n: number;
  filter: {
    min_abs_std_residual: number;
    max_p: number;
    min_abs_raw: number;
    sign: string;
  };
  nodes: GraphNode[];
  edges: GraphEdge[];
  cycles: number[][];
  family_size: number;
  bonferroni_max_p: number;
}

export interface GraphStats {
  max_abs_z: number;
  max_abs_raw: number;
  edge_total: number;
}

export interface GraphResponse {
  revision: number;
  stats: GraphStats;
  graph: GraphDoc;
}

// --- cylinder scene --------------------------------------------------------

export interface SceneParams {
  radius: number;
  height_step: number;
  glyph_scale: number;
  L: number;
  n: number;
  categories: string[];
}

export interface SceneAxis {
  index: number;
  angle: number;
}

export interface SceneGlyph {
  j: number;
  cat: string;
  x: number;
  y: number;
  z: number;
  r: number;
}

export interface SceneEdge {
  key: string;
  x1: number;
  y1: number;
  z1: number;
  x2: number;
  y2: number;
  z2: number;
  width: number;
  sign: 1 | -1;
  cycle_id: number | null;
}

export interface SceneDoc {
  params: SceneParams;
  axes: SceneAxis[];
  glyphs: SceneGlyph[];
  edges: SceneEdge[];
}

// --- echoes / realignment --------------------------------------------------

export interface EchoGroupDoc {
  cat_j: string;
  cat_k: string;
  offset: number;
  members: [number, number][];
  mass: number;
}

export interface EchoesResponse {
  revision: number;
  phi: number;
  groups: EchoGroupDoc[];
}

export interface RealignRound {
  phi: number;
  echoes: EchoGroupDoc[];
  shifts_applied: Record<string, number>;
}

export interface RealignReport {
  initial_phi: number;
  final_phi: number;
  rounds: RealignRound[];
}

// --- model / scoring -------------------------------------------------------

export interface ModelResponse {
  revision: number;
  model_id: string;
  model: Record<string, unknown>;
}

export interface EdgeContribution {
  j: number;
  k: number;
  key: string;   // the cell the variant actually occupies at this pair
  term: number;
  floored: boolean;
}

export interface ScoreResult {
  rank: number;
  id: string;
  total_log_score: number;
  log10_fold: number;
  violated_edges: string[];
  report: {
    id: string;
    total_log_score: number;
    node_contribution: number[];
    edge_contribution: EdgeContribution[];
  };
}

export interface ScoreResponse {
  results: ScoreResult[];
}

export interface EditResponse {
  revision: number;
  key: string;
  state: 'normal' | 'pinned' | 'removed';
}

export type EdgeAction = 'pin' | 'remove' | 'reset';
