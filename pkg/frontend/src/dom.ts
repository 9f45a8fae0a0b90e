/** Minimal DOM construction helpers. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export function badge(text: string, kind = ""): HTMLElement {
  return el("span", { class: `badge ${kind}`.trim() }, [text]);
}

export function metricChips(metrics: Record<string, number> | null | undefined): HTMLElement {
  const wrap = el("span", { class: "chips" });
  if (!metrics) return wrap;
  for (const [name, value] of Object.entries(metrics)) {
    wrap.append(el("span", { class: "chip" }, [`${name} ${value.toFixed(3)}`]));
  }
  return wrap;
}
