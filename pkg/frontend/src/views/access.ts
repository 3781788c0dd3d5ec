// Access panel: groups with members and grants, plus a grants editor.

import { getJson, postJson } from "../api.js";
import { clear, el, errorBanner } from "../dom.js";
import type { AccessGroup } from "../types.js";

export async function renderAccess(root: HTMLElement): Promise<void> {
  clear(root);
  root.append(el("h1", { text: "Access groups" }));
  const list = el("div", { class: "groups", id: "group-list" });
  root.append(list);
  try {
    const groups = await getJson<AccessGroup[]>("/groups");
    for (const group of groups) {
      list.append(
        el("div", { class: "group", "data-group-id": `${group.tenant}/${group.id}` }, [
          el("h3", { text: `${group.tenant}/${group.id}` }),
          el("p", { text: `members: ${group.members.join(", ") || "—"}` }),
          el("p", { text: `admins: ${group.admins.join(", ") || "—"}` }),
          el("p", { text: `resources: ${group.resources.join(", ") || "—"}` }),
          el("p", { text: `permissions: ${group.permissions.join(", ") || "—"}` }),
        ]),
      );
    }
    if (!groups.length) list.append(el("p", { class: "empty", text: "no groups yet" }));

    const tenantInput = el("input", { placeholder: "tenant", id: "group-tenant" });
    const idInput = el("input", { placeholder: "group id", id: "group-id" });
    const createButton = el("button", { text: "create group" });
    createButton.addEventListener("click", async () => {
      createButton.setAttribute("disabled", "true");
      try {
        await postJson("/groups", { tenant: tenantInput.value, id: idInput.value });
        await renderAccess(root);
      } catch (err) {
        createButton.removeAttribute("disabled");
        list.append(errorBanner(String(err), () => renderAccess(root)));
      }
    });
    root.append(el("div", { class: "group-form" }, [tenantInput, idInput, createButton]));

    const grantGroup = el("input", { placeholder: "tenant/group", id: "grant-group" });
    const grantResource = el("input", { placeholder: "resource address or tenant.ns.*", id: "grant-resource" });
    const grantPerms = el("input", { placeholder: "READ,WRITE,MANAGE", id: "grant-perms", value: "READ" });
    const grantButton = el("button", { text: "grant" });
    grantButton.addEventListener("click", async () => {
      grantButton.setAttribute("disabled", "true");
      const [tenant, groupId] = grantGroup.value.split("/");
      try {
        await postJson(`/groups/${tenant}/${groupId}/grant`, {
          resources: [grantResource.value],
          permissions: grantPerms.value.split(",").map((p) => p.trim().toUpperCase()),
        });
        await renderAccess(root);
      } catch (err) {
        grantButton.removeAttribute("disabled");
        list.append(errorBanner(String(err), () => renderAccess(root)));
      }
    });
    root.append(el("div", { class: "grant-form" }, [grantGroup, grantResource, grantPerms, grantButton]));
  } catch (err) {
    list.append(errorBanner(String(err), () => renderAccess(root)));
  }
}
