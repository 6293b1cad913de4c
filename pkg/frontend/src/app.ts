/** DOM bootstrap: wires the loop to the page served by the label server. */

import { ApiClient } from "./api.js";
import { LabelingLoop, Screen } from "./loop.js";
import { renderMapping, renderTally, renderTask } from "./render.js";

function expertId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("expert");
  if (fromQuery) return fromQuery;
  const stored = window.localStorage.getItem("changeclass-expert");
  if (stored) return stored;
  const entered = window.prompt("expert id", "expert") ?? "expert";
  window.localStorage.setItem("changeclass-expert", entered);
  return entered;
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  const banner = document.getElementById("banner");
  if (!root || !banner) throw new Error("missing #app / #banner containers");

  const api = new ApiClient({
    expert: expertId(),
    onRetry: (attempt) => {
      banner.textContent = `connection lost, retrying (${attempt})`;
      banner.classList.add("visible");
    },
  });

  const view = {
    show(screen: Screen): void {
      banner.classList.remove("visible");
      switch (screen.kind) {
        case "task":
          root.innerHTML = renderTask(screen.task);
          break;
        case "done":
          root.innerHTML =
            `<h2>all representatives labeled</h2>` +
            renderTally(screen.tally.clusters, screen.unresolved);
          break;
        case "finished":
          root.innerHTML = renderMapping(screen.mapping);
          break;
        case "error":
          root.innerHTML = `<p class="error">${screen.message}</p>`;
          break;
      }
    },
    showSaved(changeId: string): void {
      banner.textContent = `saved ${changeId}`;
      banner.classList.add("visible");
      window.setTimeout(() => banner.classList.remove("visible"), 800);
    },
  };

  const loop = new LabelingLoop(api, view);

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    void loop.handleKey(event.key);
  });
  document.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const button = target.closest("button");
    if (!button) return;
    if (button.classList.contains("class-btn")) {
      const screen = loop.current;
      if (screen?.kind === "task") {
        const index = screen.task.classes.indexOf(button.dataset.class ?? "");
        if (index >= 0) void loop.handleKey(String(index + 1));
      }
    } else if (button.classList.contains("skip-btn")) {
      void loop.handleKey("s");
    } else if (button.classList.contains("finalize-btn")) {
      void loop.handleKey("f");
    }
  });

  void loop.start();
}

bootstrap();
