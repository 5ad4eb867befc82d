// View-side state: slider <-> filter mapping, revision bookkeeping, and the
// panel view-models.  Nothing here computes statistics — every number shown
// comes out of a service document.

import type {
  EchoesResponse,
  EchoGroupDoc,
  FilterParams,
  GraphResponse,
  RealignReport,
  ScoreResult,
} from './types.js';

// The p slider works in -log10(p): the interesting range spans hundreds of
// decades and a linear p axis would pack it all against zero.
export const NEG_LOG10_P_MAX = 300;

export interface SliderState {
  minZ: number;
  negLog10P: number;
  minRaw: number;
  sign: 'both' | 'positive' | 'negative';
}

export interface SliderBounds {
  maxZ: number;
  maxRaw: number;
}

export const DEFAULT_SLIDERS: SliderState = {
  minZ: 0,
  negLog10P: 0,
  minRaw: 0,
  sign: 'both',
};

export function sliderFilter(s: SliderState): FilterParams {
  return {
    min_z: s.minZ,
    max_p: s.negLog10P <= 0 ? 1 : Math.pow(10, -s.negLog10P),
    min_raw: s.minRaw,
    sign: s.sign,
  };
}

export function clampSliders(s: SliderState, b: SliderBounds): SliderState {
  const clip = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  return {
    minZ: clip(s.minZ, b.maxZ),
    negLog10P: clip(s.negLog10P, NEG_LOG10_P_MAX),
    minRaw: clip(s.minRaw, b.maxRaw),
    sign: s.sign,
  };
}

/** The most restrictive settings the advertised bounds allow. */
export function strictestSliders(b: SliderBounds): SliderState {
  return { minZ: b.maxZ, negLog10P: NEG_LOG10_P_MAX, minRaw: 0, sign: 'both' };
}

export class ViewState {
  datasetId: string | null = null;
  revision = 0;
  sliders: SliderState = { ...DEFAULT_SLIDERS };
  bounds: SliderBounds = { maxZ: 0, maxRaw: 0 };
  visibleEdgeCount = 0;
  selectedKeys = new Set<string>();
  hoveredGlyph: { j: number; cat: string } | null = null;
  // set on a 409; the UI shows "stale view — refresh" until the next reload
  staleView = false;

  openDataset(id: string, revision: number) {
    this.datasetId = id;
    this.revision = revision;
    this.sliders = { ...DEFAULT_SLIDERS };
    this.selectedKeys.clear();
    this.hoveredGlyph = null;
    this.staleView = false;
  }

  applyGraph(resp: GraphResponse) {
    this.revision = resp.revision;
    this.bounds = { maxZ: resp.stats.max_abs_z, maxRaw: resp.stats.max_abs_raw };
    this.sliders = clampSliders(this.sliders, this.bounds);
    this.visibleEdgeCount = resp.graph.edges.length;
    this.staleView = false;
  }

  noteRevision(revision: number) {
    this.revision = revision;
    this.staleView = false;
  }

  markStale() {
    this.staleView = true;
  }

  setSliders(s: Partial<SliderState>) {
    this.sliders = clampSliders({ ...this.sliders, ...s }, this.bounds);
  }

  filter(): FilterParams {
    return sliderFilter(this.sliders);
  }

  toggleSelected(key: string) {
    if (this.selectedKeys.has(key)) this.selectedKeys.delete(key);
    else this.selectedKeys.add(key);
  }
}

// --- echo panel ------------------------------------------------------------

export interface EchoRow {
  label: string;
  mass: number;
  offset: number;
  memberCount: number;
  group: EchoGroupDoc;
}

export function echoLabel(g: EchoGroupDoc): string {
  const first = g.members[0];
  const last = g.members[g.members.length - 1];
  return `${g.cat_j}·${g.cat_k} Δ${g.offset} @${first[0]}–${last[0]}`;
}

export function echoPanel(resp: EchoesResponse): { phi: number; rows: EchoRow[] } {
  return {
    phi: resp.phi,
    rows: resp.groups.map((g) => ({
      label: echoLabel(g),
      mass: g.mass,
      offset: g.offset,
      memberCount: g.members.length,
      group: g,
    })),
  };
}

// --- realign report --------------------------------------------------------

export interface RealignSummary {
  before: number;
  after: number;
  ratio: number;
  improved: boolean;
  rounds: number;
  rowsShifted: number;
}

export function realignSummary(report: RealignReport): RealignSummary {
  let rowsShifted = 0;
  for (const round of report.rounds) {
    for (const [shift, count] of Object.entries(round.shifts_applied)) {
      if (shift !== '0') rowsShifted += count;
    }
  }
  return {
    before: report.initial_phi,
    after: report.final_phi,
    ratio: report.initial_phi > 0 ? report.final_phi / report.initial_phi : NaN,
    improved: report.final_phi > report.initial_phi,
    rounds: report.rounds.length,
    rowsShifted,
  };
}

// --- score panel -----------------------------------------------------------

export interface ScoreRow {
  rank: number;
  id: string;
  total: number;
  log10Fold: number;
  violatedCount: number;
}

export function scoreRows(results: ScoreResult[]): ScoreRow[] {
  return results.map((r) => ({
    rank: r.rank,
    id: r.id,
    total: r.total_log_score,
    log10Fold: r.log10_fold,
    violatedCount: r.violated_edges.length,
  }));
}

/** Itemized terms shown when a row is expanded; they sum to the total. */
export function contributionSum(r: ScoreResult): number {
  const nodes = r.report.node_contribution.reduce((a, v) => a + v, 0);
  const edges = r.report.edge_contribution.reduce((a, e) => a + e.term, 0);
  return nodes + edges;
}

/** Selected-edge keys this variant violates, for highlighting in the 3D view. */
export function violatedKeySet(r: ScoreResult): Set<string> {
  return new Set(r.violated_edges);
}
