import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";
import { TAG_CLASSES, escapeHtml, renderDiff, renderLegend, renderTally, renderTask, } from "../src/render.js";
import { makeTask } from "./mockserver.js";
test("diff lines carry three distinct tag classes", () => {
    const task = makeTask("c1", 0, ["B", "F"]);
    const html = renderDiff(task.files);
    assert.match(html, /class="line line-add"/);
    assert.match(html, /class="line line-del"/);
    assert.match(html, /class="line line-mod"/);
    const tags = new Set(Object.values(TAG_CLASSES));
    assert.equal(tags.size, 3);
});
test("stylesheet styles each tag class distinctly", () => {
    const here = dirname(fileURLToPath(import.meta.url));
    const css = readFileSync(join(here, "..", "..", "static", "style.css"), "utf-8");
    const rules = new Map();
    for (const cls of Object.values(TAG_CLASSES)) {
        const match = css.match(new RegExp(`\\.${cls}\\s*\\{([^}]*)\\}`));
        assert.ok(match, `missing css rule for .${cls}`);
        rules.set(cls, match[1].replace(/\s+/g, " ").trim());
    }
    const bodies = [...rules.values()];
    assert.equal(new Set(bodies).size, 3, "tag styles must differ");
});
test("modified pairs render on both panes", () => {
    const task = makeTask("c1", 0, ["B", "F"]);
    const html = renderDiff(task.files);
    assert.match(html, /before_line\(\);/);
    assert.match(html, /after_line\(\);/);
    const mods = html.match(/line-mod/g) ?? [];
    assert.equal(mods.length, 2);
});
test("legend binds digits in class-set order", () => {
    const html = renderLegend(["B", "F", "N"]);
    assert.match(html, /<kbd>1<\/kbd> B/);
    assert.match(html, /<kbd>2<\/kbd> F/);
    assert.match(html, /<kbd>3<\/kbd> N/);
    assert.ok(html.indexOf("B") < html.indexOf("F"));
});
test("task view includes metric readout and progress", () => {
    const html = renderTask(makeTask("c9", 2, ["B", "F"]));
    assert.match(html, /loc_add/);
    assert.match(html, /cluster q2/);
    assert.match(html, /progress/);
});
test("markup in diff content is escaped", () => {
    const task = makeTask("c1", 0, ["B"]);
    task.files[0].hunks[0].added = ["<script>alert(1)</script>"];
    const html = renderDiff(task.files);
    assert.ok(!html.includes("<script>alert"));
    assert.match(html, /&lt;script&gt;/);
    assert.equal(escapeHtml(`a<b>"&`), "a&lt;b&gt;&quot;&amp;");
});
test("tally screen marks ties", () => {
    const html = renderTally([
        { cluster: 0, labels: { B: 2, F: 2 }, leader: null, tied: true },
        { cluster: 1, labels: { N: 3 }, leader: "N", tied: false },
    ], [0]);
    assert.match(html, /class="tied"/);
    assert.match(html, /finalize-btn/);
});
