// Suggestion inbox: pending optimizations with their evidence tables and
// accept/reject actions. Buttons disable on first click so double clicks
// send a single POST; the optimistic move is confirmed by a refetch.

import { getJson, postJson } from "../api.js";
import { clear, el, errorBanner } from "../dom.js";
import type { Suggestion } from "../types.js";

function evidenceTable(suggestion: Suggestion): HTMLElement {
  const evidence = suggestion.evidence;
  const table = el("table", { class: "evidence-table" });
  table.append(el("tr", {}, [
    el("th", { text: "window" }),
    el("td", { text: `${evidence.window.from ?? "∞"} → ${evidence.window.to ?? "now"}` }),
  ]));
  table.append(el("tr", {}, [
    el("th", { text: "queries" }),
    el("td", { text: String(evidence.query_count) }),
  ]));
  if (evidence.path_shares) {
    for (const [path, share] of Object.entries(evidence.path_shares)) {
      const scanned = evidence.avg_partitions_scanned?.[path];
      table.append(el("tr", {}, [
        el("th", { text: path }),
        el("td", {
          text: `${(share * 100).toFixed(1)}% of predicate weight` +
            (scanned != null ? `, avg ${scanned.toFixed(1)} partitions scanned` : ""),
        }),
      ]));
    }
  }
  if (evidence.derivation_proof) {
    for (const proof of evidence.derivation_proof) {
      table.append(el("tr", {}, [
        el("th", { text: proof.query_id }),
        el("td", { text: `${proof.mode} reading ${proof.reads.join(", ")}` }),
      ]));
    }
  }
  return table;
}

export async function renderSuggestions(root: HTMLElement): Promise<void> {
  clear(root);
  root.append(el("h1", { text: "Optimization inbox" }));
  const list = el("div", { class: "suggestions", id: "suggestion-list" });
  root.append(list);
  try {
    const suggestions = await getJson<Suggestion[]>("/suggestions");
    if (!suggestions.length) {
      list.append(el("p", { class: "empty", text: "inbox empty" }));
      return;
    }
    for (const suggestion of suggestions) {
      const card = el("div", {
        class: `suggestion suggestion-${suggestion.state}`,
        "data-suggestion-id": suggestion.id,
        "data-state": suggestion.state,
      });
      const title = suggestion.kind === "ClusterKey"
        ? `Cluster ${suggestion.target} by ${suggestion.path}`
        : `Disable failsafe retention on ${suggestion.target}`;
      card.append(
        el("div", { class: "suggestion-head" }, [
          el("strong", { text: title }),
          el("span", { class: "state", text: suggestion.state }),
        ]),
        evidenceTable(suggestion),
      );
      if (suggestion.state === "pending") {
        const accept = el("button", { class: "accept", text: "accept" });
        const reject = el("button", { class: "reject", text: "reject" });
        const note = el("span", { class: "note" });
        const resolve = async (decision: "accept" | "reject") => {
          accept.setAttribute("disabled", "true");
          reject.setAttribute("disabled", "true");
          card.setAttribute("data-state", decision === "accept" ? "applied" : "rejected");
          try {
            await postJson(`/suggestions/${suggestion.id}/resolve`, { decision });
            await renderSuggestions(root); // confirmed by refetch
          } catch (err) {
            card.setAttribute("data-state", "pending"); // revert optimistic state
            accept.removeAttribute("disabled");
            reject.removeAttribute("disabled");
            note.textContent = String(err);
          }
        };
        accept.addEventListener("click", () => void resolve("accept"));
        reject.addEventListener("click", () => void resolve("reject"));
        card.append(el("div", { class: "actions" }, [accept, reject, note]));
      } else if (suggestion.state === "rejected") {
        card.append(el("p", {
          class: "suppressed-note",
          text: "rejected — suppressed for the cool-down window",
        }));
      }
      list.append(card);
    }
  } catch (err) {
    list.append(errorBanner(String(err), () => renderSuggestions(root)));
  }
}
