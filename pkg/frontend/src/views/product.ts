// Product detail: resources, stability report with per-check evidence,
// PII findings, and the feedback form. Classes and verdicts are displayed
// exactly as served.

import { getJson, postJson } from "../api.js";
import { classBadge, clear, el, errorBanner } from "../dom.js";
import type { ProductDetail } from "../types.js";

export async function renderProduct(root: HTMLElement, address: string): Promise<void> {
  clear(root);
  try {
    const product = await getJson<ProductDetail>(`/products/${encodeURIComponent(address)}`);
    const latest = product.stability_history[product.stability_history.length - 1];
    root.append(
      el("a", { href: "#/catalog", class: "back", text: "← catalog" }),
      el("div", { class: "product-head" }, [
        el("h1", { text: product.address }),
        classBadge(product.class),
      ]),
      el("p", { class: "desc", text: product.description }),
      el("p", { class: "objective", text: `Objective: ${product.business_objective}` }),
      el("p", { class: "support", text: `Owner ${product.owner} · support ${product.support_channel || "—"}` }),
      el("h2", { text: "Resources" }),
      el("ul", { class: "resources" },
        product.resources.map((r) =>
          el("li", {}, [el("a", { href: `#/lineage/${encodeURIComponent(r)}`, text: r })]))),
    );

    root.append(el("h2", { text: "Stability report" }));
    if (latest) {
      const table = el("table", { class: "report" });
      table.append(el("tr", {}, [
        el("th", { text: "category" }), el("th", { text: "check" }),
        el("th", { text: "result" }), el("th", { text: "evidence" }),
      ]));
      for (const attr of latest.attributes) {
        table.append(el("tr", { class: attr.passed ? "passed" : "failed" }, [
          el("td", { text: attr.category }),
          el("td", { text: attr.check }),
          el("td", { text: attr.passed ? "pass" : "fail" }),
          el("td", { class: "evidence", text: attr.evidence }),
        ]));
      }
      root.append(table, el("p", { class: "evaluated-at", text: `evaluated ${latest.evaluated_at}` }));
    } else {
      root.append(el("p", { class: "empty", text: "not evaluated yet (class Internal until first evaluation)" }));
    }

    root.append(el("h2", { text: "PII findings" }));
    if (product.pii_findings.length) {
      const list = el("ul", { class: "pii" });
      for (const finding of product.pii_findings) {
        list.append(el("li", {
          class: `pii-${finding.state}`,
          text: `${finding.path} → ${finding.pii_class} (${finding.confidence}, ${finding.state})`,
        }));
      }
      root.append(list);
    } else {
      root.append(el("p", { class: "empty", text: "none flagged" }));
    }

    root.append(el("h2", { text: "Feedback" }));
    const ratingInput = el("input", { type: "number", min: "1", max: "5", value: "5", id: "rating" });
    const commentInput = el("input", { type: "text", placeholder: "comment", id: "comment" });
    const submit = el("button", { text: "rate", id: "submit-feedback" });
    const status = el("span", { class: "feedback-status" });
    submit.addEventListener("click", async () => {
      submit.setAttribute("disabled", "true");
      try {
        await postJson(`/products/${encodeURIComponent(address)}/feedback`, {
          rating: Number(ratingInput.value),
          comment: commentInput.value,
        });
        await renderProduct(root, address); // confirmed by refetch
      } catch (err) {
        status.textContent = String(err);
        submit.removeAttribute("disabled");
      }
    });
    root.append(el("div", { class: "feedback-form" }, [ratingInput, commentInput, submit, status]));
    const entries = el("ul", { class: "feedback-entries" });
    for (const entry of product.feedback) {
      entries.append(el("li", { text: `${entry.principal}: ★${entry.rating} ${entry.comment}` }));
    }
    root.append(entries);
  } catch (err) {
    root.append(errorBanner(String(err), () => renderProduct(root, address)));
  }
}
