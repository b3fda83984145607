/** Deterministic layered DAG layout (no randomness, stable per model). */

export interface Point {
  x: number;
  y: number;
}

export function layeredLayout(
  nodes: string[],
  edges: [string, string][],
  width = 800,
  height = 500,
): Map<string, Point> {
  const parents = new Map<string, string[]>(nodes.map((n) => [n, []]));
  for (const [u, v] of edges) {
    parents.get(v)?.push(u);
  }
  // longest-path depth; nodes are processed in dependency order
  const depth = new Map<string, number>();
  const resolve = (node: string, trail: Set<string>): number => {
    const known = depth.get(node);
    if (known !== undefined) return known;
    if (trail.has(node)) return 0; // defensive: consensus graphs are acyclic
    trail.add(node);
    const ps = parents.get(node) ?? [];
    const d = ps.length === 0 ? 0 : 1 + Math.max(...ps.map((p) => resolve(p, trail)));
    depth.set(node, d);
    return d;
  };
  for (const n of nodes) resolve(n, new Set());

  const layers = new Map<number, string[]>();
  for (const n of nodes) {
    const d = depth.get(n) ?? 0;
    const layer = layers.get(d) ?? [];
    layer.push(n);
    layers.set(d, layer);
  }
  const maxDepth = Math.max(...layers.keys());
  const positions = new Map<string, Point>();
  for (const [d, members] of layers) {
    members.sort();
    members.forEach((n, i) => {
      positions.set(n, {
        x: ((i + 1) / (members.length + 1)) * width,
        y: maxDepth === 0 ? height / 2 : 60 + (d / maxDepth) * (height - 120),
      });
    });
  }
  return positions;
}
