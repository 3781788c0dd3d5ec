// Tiny DOM helpers; no framework, no virtual DOM.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    if (name === "text") node.textContent = value;
    else node.setAttribute(name, value);
  }
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function errorBanner(message: string, retry: () => void): HTMLElement {
  const button = el("button", { class: "retry", text: "retry" });
  button.addEventListener("click", retry);
  return el("div", { class: "error-banner", role: "alert" }, [
    el("span", { text: message }),
    button,
  ]);
}

export function classBadge(stabilityClass: string): HTMLElement {
  return el("span", {
    class: `badge badge-${stabilityClass.toLowerCase()}`,
    text: stabilityClass,
  });
}

export function sparkline(usage: number, max = 1000): HTMLElement {
  const width = Math.max(2, Math.min(100, Math.round((usage / max) * 100)));
  const bar = el("span", { class: "spark-bar" });
  bar.style.width = `${width}px`;
  const wrap = el("span", { class: "spark", title: `${usage} queries / 30d` }, [bar]);
  return wrap;
}
