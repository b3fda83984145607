/** SVG rendering of the consensus network.
 *
 * Edge thickness is a monotone function of ensemble strength; nodes whose
 * incoming edges were blacklisted (the "*" wildcard) carry a lock badge.
 * Layout comes from the deterministic layered algorithm, so the same model
 * always renders the same picture.
 */

import { layeredLayout } from "./layout.js";
import type { ModelRecord } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function edgeWidth(strength: number): number {
  return 0.5 + 3 * strength;
}

export function wildcardBlacklistTargets(model: ModelRecord): string[] {
  const blacklist = model.provenance?.config?.blacklist ?? [];
  return blacklist.filter(([u]) => u === "*").map(([, v]) => v);
}

export function renderNetwork(container: HTMLElement, model: ModelRecord): SVGSVGElement {
  const doc = container.ownerDocument;
  const nodes = model.network.variables.map((v) => v.name);
  const edges = model.network.edges;
  const strengths = new Map(
    model.ensemble.edge_strength.map((e) => [`${e.from}->${e.to}`, e.strength]),
  );
  const positions = layeredLayout(nodes, edges);
  const marked = new Set(wildcardBlacklistTargets(model));

  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", "0 0 800 500");
  svg.setAttribute("class", "network-view");

  const defs = doc.createElementNS(SVG_NS, "defs");
  const marker = doc.createElementNS(SVG_NS, "marker");
  marker.setAttribute("id", "arrow");
  marker.setAttribute("markerWidth", "8");
  marker.setAttribute("markerHeight", "8");
  marker.setAttribute("refX", "7");
  marker.setAttribute("refY", "3");
  marker.setAttribute("orient", "auto");
  const tip = doc.createElementNS(SVG_NS, "path");
  tip.setAttribute("d", "M0,0 L7,3 L0,6 Z");
  tip.setAttribute("fill", "#555");
  marker.appendChild(tip);
  defs.appendChild(marker);
  svg.appendChild(defs);

  for (const [u, v] of edges) {
    const from = positions.get(u);
    const to = positions.get(v);
    if (!from || !to) continue;
    const strength =
      strengths.get(`${u}->${v}`) ?? strengths.get(`${v}->${u}`) ?? 1.0;
    const line = doc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(from.x));
    line.setAttribute("y1", String(from.y));
    line.setAttribute("x2", String(to.x));
    line.setAttribute("y2", String(to.y));
    line.setAttribute("stroke", "#555");
    line.setAttribute("stroke-width", String(edgeWidth(strength)));
    line.setAttribute("marker-end", "url(#arrow)");
    line.setAttribute("class", "network-edge");
    line.setAttribute("data-from", u);
    line.setAttribute("data-to", v);
    line.setAttribute("data-strength", String(strength));
    svg.appendChild(line);
  }

  for (const name of nodes) {
    const at = positions.get(name);
    if (!at) continue;
    const group = doc.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "network-node");
    group.setAttribute("data-node", name);
    group.setAttribute("data-blacklisted", marked.has(name) ? "true" : "false");

    const circle = doc.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(at.x));
    circle.setAttribute("cy", String(at.y));
    circle.setAttribute("r", "22");
    circle.setAttribute("fill", marked.has(name) ? "#dbe9f6" : "#f2f2f2");
    circle.setAttribute("stroke", "#444");
    group.appendChild(circle);

    const label = doc.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(at.x));
    label.setAttribute("y", String(at.y + 36));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("font-size", "11");
    label.textContent = name;
    group.appendChild(label);

    if (marked.has(name)) {
      const badge = doc.createElementNS(SVG_NS, "text");
      badge.setAttribute("x", String(at.x));
      badge.setAttribute("y", String(at.y + 4));
      badge.setAttribute("text-anchor", "middle");
      badge.setAttribute("font-size", "10");
      badge.setAttribute("class", "blacklist-badge");
      badge.textContent = "no-in";
      group.appendChild(badge);
    }
    svg.appendChild(group);
  }

  container.replaceChildren(svg);
  return svg;
}
