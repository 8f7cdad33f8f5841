/**
 * Disambiguation chooser: a list of candidate buttons rendered into a
 * container. Mouse click and keyboard (arrows + Enter, or digit keys)
 * go through the same submit path, and the whole panel is torn down
 * after exactly one submission.
 */

import type { Candidate } from "./chat.js";

export interface ChooserHandle {
  element: HTMLElement;
  /** Index currently highlighted for keyboard users. */
  readonly active: number;
}

export function renderChooser(
  doc: Document,
  prompt: string,
  options: Candidate[],
  onChoose: (index: number) => void,
): ChooserHandle {
  const panel = doc.createElement("div");
  panel.className = "chooser";
  panel.setAttribute("role", "listbox");
  panel.tabIndex = 0;

  const heading = doc.createElement("p");
  heading.textContent = prompt;
  panel.appendChild(heading);

  let active = 0;
  let settled = false;

  const buttons = options.map((option, i) => {
    const button = doc.createElement("button");
    button.textContent = `${option.label} (${option.confidence.toFixed(2)})`;
    button.dataset.index = String(i);
    button.addEventListener("click", () => choose(i));
    panel.appendChild(button);
    return button;
  });

  function highlight(index: number) {
    active = index;
    buttons.forEach((b, i) => b.classList.toggle("active", i === active));
  }

  function choose(index: number) {
    if (settled) return; // exactly one submission per chooser
    settled = true;
    panel.remove();
    onChoose(index);
  }

  panel.addEventListener("keydown", (event: KeyboardEvent) => {
    if (event.key === "ArrowDown") {
      highlight(Math.min(active + 1, options.length - 1));
      event.preventDefault();
    } else if (event.key === "ArrowUp") {
      highlight(Math.max(active - 1, 0));
      event.preventDefault();
    } else if (event.key === "Enter") {
      choose(active);
      event.preventDefault();
    } else if (/^[0-9]$/.test(event.key)) {
      const index = Number(event.key);
      if (index < options.length) choose(index);
    }
  });

  highlight(0);
  return {
    element: panel,
    get active() {
      return active;
    },
  };
}
