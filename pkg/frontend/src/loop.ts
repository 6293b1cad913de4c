/**
 * The labeling loop, DOM-free: fetch task, render, send the chosen label,
 * fetch the next. One label POST in flight at a time. On 204 the finalize
 * screen shows the tallies; a 409 finalize returns to labeling with the
 * tied cluster's extra tasks.
 */

import type { ApiClient } from "./api.js";
import type { Tally, Task } from "./types.js";
import { actionForKey } from "./keys.js";

export type Screen =
  | { kind: "task"; task: Task }
  | { kind: "done"; tally: Tally; unresolved: number[] }
  | { kind: "finished"; mapping: Record<string, string> }
  | { kind: "error"; message: string };

export interface LoopView {
  show(screen: Screen): void;
  showSaved(changeId: string): void;
}

type Api = Pick<ApiClient, "nextTask" | "postLabel" | "skip" | "clusters" | "finalize">;

export class LabelingLoop {
  private screen: Screen | null = null;
  private busy = false;

  constructor(
    private api: Api,
    private view: LoopView,
  ) {}

  get current(): Screen | null {
    return this.screen;
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Pull the next task, or the tally screen when labeling is complete. */
  private async advance(unresolved: number[] = []): Promise<void> {
    const task = await this.api.nextTask();
    if (task === null) {
      const tally = await this.api.clusters();
      this.screen = { kind: "done", tally, unresolved };
    } else {
      this.screen = { kind: "task", task };
    }
    this.view.show(this.screen);
  }

  /** Route one keypress; ignored while a POST is in flight. */
  async handleKey(key: string): Promise<void> {
    if (this.busy || this.screen === null) return;
    const classCount = this.screen.kind === "task" ? this.screen.task.classes.length : 0;
    const action = actionForKey(key, classCount);
    if (action === null) return;
    this.busy = true;
    try {
      if (action.kind === "label" && this.screen.kind === "task") {
        const task = this.screen.task;
        await this.api.postLabel(task.change_id, task.classes[action.classIndex]);
        this.view.showSaved(task.change_id); // only after the server's 201
        await this.advance();
      } else if (action.kind === "skip" && this.screen.kind === "task") {
        await this.api.skip(this.screen.task.change_id);
        await this.advance();
      } else if (action.kind === "finalize" && this.screen.kind === "done") {
        await this.finalize();
      }
    } catch (error) {
      this.screen = { kind: "error", message: String(error) };
      this.view.show(this.screen);
    } finally {
      this.busy = false;
    }
  }

  private async finalize(): Promise<void> {
    const result = await this.api.finalize();
    if (result.ok) {
      this.screen = { kind: "finished", mapping: result.mapping };
      this.view.show(this.screen);
    } else {
      // Tied clusters queued extra representatives: back to labeling.
      await this.advance(result.unresolved);
    }
  }
}
