import assert from "node:assert/strict";
import { test } from "node:test";
import { ApiClient } from "../src/api.js";
import { LabelingLoop } from "../src/loop.js";
import { renderTask } from "../src/render.js";
import { MockServer, makeTask } from "./mockserver.js";
const CLASSES = ["B", "F", "N"];
class CapturingView {
    screens = [];
    saved = [];
    html = "";
    show(screen) {
        this.screens.push(screen);
        if (screen.kind === "task")
            this.html = renderTask(screen.task);
    }
    showSaved(changeId) {
        this.saved.push(changeId);
    }
    get last() {
        return this.screens[this.screens.length - 1];
    }
}
function client(base, overrides = {}) {
    return new ApiClient({ base, expert: "e1", retryDelayMs: 10, ...overrides });
}
test("contract: renders tagged diff and posts the keyed class within one task cycle", async () => {
    const mock = new MockServer({ tasks: [makeTask("c1", 0, CLASSES), makeTask("c2", 0, CLASSES)] });
    const base = await mock.start();
    try {
        const view = new CapturingView();
        const loop = new LabelingLoop(client(base), view);
        await loop.start();
        // Rendered markup carries all three tag classes with distinct names.
        assert.match(view.html, /line-add/);
        assert.match(view.html, /line-del/);
        assert.match(view.html, /line-mod/);
        await loop.handleKey("2"); // class index 1 = "F"
        assert.deepEqual(mock.labels.get("c1"), { class: "F", expert: "e1" });
        // Exactly one label POST between the two task fetches.
        const trace = mock.requests.filter((r) => r !== "GET /api/clusters");
        assert.deepEqual(trace.slice(0, 3), [
            "GET /api/task/next",
            "POST /api/label",
            "GET /api/task/next",
        ]);
        assert.equal(view.saved.length, 1); // confirmation only after the 201
    }
    finally {
        mock.stop();
    }
});
test("skip requeues and advances", async () => {
    const mock = new MockServer({ tasks: [makeTask("c1", 0, CLASSES), makeTask("c2", 0, CLASSES)] });
    const base = await mock.start();
    try {
        const view = new CapturingView();
        const loop = new LabelingLoop(client(base), view);
        await loop.start();
        await loop.handleKey("s");
        assert.equal(view.last.kind, "task");
        assert.equal(view.last.task.change_id, "c2");
    }
    finally {
        mock.stop();
    }
});
test("dropped label response retries idempotently; no label lost or doubled", async () => {
    const mock = new MockServer({
        tasks: [makeTask("c1", 0, CLASSES)],
        dropFirstLabelResponse: true,
    });
    const base = await mock.start();
    try {
        let retries = 0;
        const view = new CapturingView();
        const loop = new LabelingLoop(client(base, { onRetry: () => retries++ }), view);
        await loop.start();
        await loop.handleKey("1");
        assert.ok(retries >= 1, "expected a retry after the dropped response");
        assert.deepEqual(mock.labels.get("c1"), { class: "B", expert: "e1" });
        // The same client label id was reused on the retry.
        assert.equal(new Set(mock.labelIds).size, 1);
        assert.equal(view.saved.length, 1);
    }
    finally {
        mock.stop();
    }
});
test("twelve labels across three clusters finalize to the plurality map", async () => {
    const tasks = [];
    const truth = { 0: "B", 1: "F", 2: "N" };
    for (let cluster = 0; cluster < 3; cluster++) {
        for (let i = 0; i < 4; i++) {
            tasks.push(makeTask(`q${cluster}-${i}`, cluster, CLASSES));
        }
    }
    const mock = new MockServer({ tasks });
    const base = await mock.start();
    try {
        const view = new CapturingView();
        const loop = new LabelingLoop(client(base), view);
        await loop.start();
        let guard = 0;
        while (view.last.kind === "task" && guard++ < 20) {
            const task = view.last.task;
            const key = String(CLASSES.indexOf(truth[task.cluster]) + 1);
            await loop.handleKey(key);
        }
        assert.equal(view.last.kind, "done");
        assert.equal(mock.labels.size, 12);
        await loop.handleKey("f");
        assert.equal(view.last.kind, "finished");
        assert.deepEqual(view.last.mapping, { "0": "B", "1": "F", "2": "N" });
    }
    finally {
        mock.stop();
    }
});
test("finalize tie (409) returns to labeling with the tally still visible", async () => {
    const mock = new MockServer({ tasks: [makeTask("c1", 0, CLASSES)] });
    mock.finalizeTieOnce = true;
    const base = await mock.start();
    try {
        const view = new CapturingView();
        const loop = new LabelingLoop(client(base), view);
        await loop.start();
        await loop.handleKey("1");
        const afterLabel = view.last;
        assert.equal(afterLabel.kind, "done");
        // Tie: the server queues extra work for cluster 0.
        mock.queueExtra(makeTask("c1-extra", 0, CLASSES));
        await loop.handleKey("f");
        const afterTie = view.last;
        assert.equal(afterTie.kind, "task");
        assert.equal(afterTie.task.change_id, "c1-extra");
        await loop.handleKey("1");
        const afterExtra = view.last;
        assert.equal(afterExtra.kind, "done");
        assert.deepEqual(afterExtra.unresolved ?? [], []);
        await loop.handleKey("f");
        const finished = view.last;
        assert.equal(finished.kind, "finished");
    }
    finally {
        mock.stop();
    }
});
