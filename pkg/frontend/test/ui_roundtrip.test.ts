// End-to-end checks against the live service, driving the same state ->
// filter -> fetch -> render path the browser shell uses.

import { describe, expect, it } from 'vitest';
import { CovarClient } from '../src/api.js';
import { CylinderView } from '../src/scene.js';
import { echoPanel, realignSummary, strictestSliders, ViewState } from '../src/state.js';
import { SERVICE_BASE } from './config.js';

const client = new CovarClient(SERVICE_BASE);

describe('UI round trip on the bundled demo', () => {
  it('displayed edge count equals the service count at three slider settings', async () => {
    const info = await client.uploadDemo('hairpin');
    const vs = new ViewState();
    vs.openDataset(info.id, info.revision);
    // establish slider bounds the way the shell does: one permissive fetch
    vs.applyGraph(await client.graph(info.id));

    const settings = [
      { minZ: 0, negLog10P: 0 },
      { minZ: 2, negLog10P: 0 },
      { minZ: 2, negLog10P: 2 },
    ];
    const seen: number[] = [];
    for (const s of settings) {
      vs.setSliders(s);
      const graph = await client.graph(info.id, vs.filter());
      vs.applyGraph(graph);
      const view = new CylinderView(await client.scene(info.id, vs.filter()));
      expect(view.edgeCount()).toBe(graph.graph.edges.length);
      expect(view.edgeCount()).toBe(vs.visibleEdgeCount);
      seen.push(view.edgeCount());
      view.dispose();
    }
    // the three settings genuinely exercise the filter
    expect(seen[0]).toBeGreaterThan(seen[1]);
    expect(seen[1]).toBeGreaterThan(seen[2]);
    expect(seen[2]).toBeGreaterThan(0);
  });

  it('a pinned edge stays on screen under the strictest sliders', async () => {
    const info = await client.uploadDemo('hairpin');
    const vs = new ViewState();
    vs.openDataset(info.id, info.revision);
    const permissive = await client.graph(info.id);
    vs.applyGraph(permissive);

    // pin a weak edge that the strictest filter would certainly drop
    const weak = permissive.graph.edges.find((e) => Math.abs(e.z) < 1)!;
    const edit = await client.editEdge(info.id, weak.key, 'pin', vs.revision);
    vs.noteRevision(edit.revision);

    vs.setSliders(strictestSliders(vs.bounds));
    const graph = await client.graph(info.id, vs.filter());
    const view = new CylinderView(await client.scene(info.id, vs.filter()));
    expect(view.hasEdge(weak.key)).toBe(true);
    const pinned = graph.graph.edges.find((e) => e.key === weak.key);
    expect(pinned?.state).toBe('pinned');
    expect(view.edgeCount()).toBe(graph.graph.edges.length);
    view.dispose();
  });

  it('the realign button yields the mass-increase report on the shifted demo', async () => {
    const info = await client.uploadDemo('shifted');
    const vs = new ViewState();
    vs.openDataset(info.id, info.revision);
    vs.applyGraph(await client.graph(info.id));
    vs.setSliders({ minZ: 4 });

    // the echo panel the analyst sees before clicking
    const before = echoPanel(await client.echoes(info.id, vs.filter()));
    expect(before.rows.length).toBeGreaterThan(0);
    expect(before.rows[0].memberCount).toBeGreaterThanOrEqual(2);

    const report = await client.realign(info.id, { revision: vs.revision });
    const summary = realignSummary(report);
    expect(summary.before).toBeCloseTo(before.phi, 9);
    expect(summary.improved).toBe(true);
    expect(summary.after).toBeGreaterThan(summary.before);
    expect(summary.rowsShifted).toBeGreaterThan(0);

    // the view refreshes against the realigned session
    const graph = await client.graph(info.id, vs.filter());
    expect(graph.revision).toBe(1);
    const view = new CylinderView(await client.scene(info.id, vs.filter()));
    expect(view.edgeCount()).toBe(graph.graph.edges.length);
    view.dispose();
  });
});
