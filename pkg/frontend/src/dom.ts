/** DOM rendering: slate cards, tri-state pair buttons, diff panel. */

import { SessionController, TriState } from "./controller.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

const TRI_LABELS: [TriState, string][] = [
  [1, "like"],
  [0, "none"],
  [-1, "dislike"],
];

function pairControl(
  controller: SessionController,
  rec: string,
  other: string,
  rerender: () => void,
): HTMLElement {
  const wrap = el("span", "tri");
  for (const [state, label] of TRI_LABELS) {
    const button = el("button", "tri-btn", label);
    if (controller.pairState(rec, other) === state) {
      button.classList.add("active");
    }
    button.addEventListener("click", () => {
      void controller.ratePair(rec, other, state).then(rerender);
    });
    wrap.appendChild(button);
  }
  return wrap;
}

export function renderSlate(
  root: HTMLElement,
  controller: SessionController,
): void {
  const rerender = () => renderSlate(root, controller);
  root.replaceChildren();
  const slate = controller.slate;
  if (!slate) {
    root.appendChild(el("p", "empty", "no slate loaded"));
    return;
  }
  const head = el("header");
  head.appendChild(el("h1", undefined, `slate v${slate.version}`));
  if (controller.offline) {
    head.appendChild(
      el("p", "offline", `offline: ${controller.pendingCount()} rating(s) queued`),
    );
  }
  const relearn = el("button", "relearn", "relearn");
  relearn.disabled = !controller.relearnEnabled();
  relearn.addEventListener("click", () => {
    void controller.relearn().then(rerender);
  });
  head.appendChild(relearn);
  root.appendChild(head);

  for (const card of slate.cards) {
    const section = el("section", "card");
    const title = el("h2", undefined, card.item);
    const likeBtn = el("button", "item-like", "like item");
    const dislikeBtn = el("button", "item-dislike", "dislike item");
    likeBtn.addEventListener("click", () => {
      void controller.rateItem(card.item, true).then(rerender);
    });
    dislikeBtn.addEventListener("click", () => {
      void controller.rateItem(card.item, false).then(rerender);
    });
    section.append(title, el("p", "tags", card.tags.join(", ")), likeBtn, dislikeBtn);

    const list = el("ul", "rows");
    for (const row of card.rows) {
      const entry = el("li", "row");
      entry.appendChild(el("span", "row-item", row.item));
      entry.appendChild(el("span", "row-shared", row.shared.join(", ")));
      entry.appendChild(pairControl(controller, card.item, row.item, rerender));
      list.appendChild(entry);
    }
    section.appendChild(list);
    root.appendChild(section);
  }

  if (controller.lastDiff) {
    const panel = el("aside", "diff");
    panel.appendChild(el("h2", undefined, "slate changes"));
    panel.appendChild(
      el("p", "entered", `entered: ${controller.lastDiff.entered.join(", ") || "-"}`),
    );
    panel.appendChild(
      el("p", "left", `left: ${controller.lastDiff.left.join(", ") || "-"}`),
    );
    root.appendChild(panel);
  }
}
