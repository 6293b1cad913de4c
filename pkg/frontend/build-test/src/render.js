/**
 * Pure HTML renderers. Every changed line carries one of three tag
 * classes: line-add, line-del, line-mod. The renderers never touch the
 * DOM, which keeps them testable without a browser.
 */
export const TAG_CLASSES = {
    added: "line-add",
    deleted: "line-del",
    modified: "line-mod",
};
export function escapeHtml(text) {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
function line(cls, text) {
    return `<div class="line ${cls}"><code>${escapeHtml(text)}</code></div>`;
}
/** Two panes per hunk: old side (deleted + pair-before), new side
 * (added + pair-after). */
export function renderDiff(files) {
    const parts = [];
    for (const file of files) {
        const badge = file.is_add ? " (new file)" : file.is_delete ? " (deleted file)" : "";
        parts.push(`<section class="file"><h3>${escapeHtml(file.path)}${badge}</h3>`);
        for (const hunk of file.hunks) {
            const oldSide = [];
            const newSide = [];
            for (const [before] of hunk.modified)
                oldSide.push(line(TAG_CLASSES.modified, before));
            for (const text of hunk.deleted)
                oldSide.push(line(TAG_CLASSES.deleted, text));
            for (const [, after] of hunk.modified)
                newSide.push(line(TAG_CLASSES.modified, after));
            for (const text of hunk.added)
                newSide.push(line(TAG_CLASSES.added, text));
            parts.push(`<div class="hunk" data-old-start="${hunk.old_start}" data-new-start="${hunk.new_start}">` +
                `<div class="pane pane-old">${oldSide.join("")}</div>` +
                `<div class="pane pane-new">${newSide.join("")}</div>` +
                `</div>`);
        }
        parts.push("</section>");
    }
    return parts.join("");
}
/** What the clusterer saw: the metric vector beside the diff. */
export function renderMetrics(metrics) {
    const rows = Object.entries(metrics)
        .map(([name, value]) => `<tr><td class="metric-name">${escapeHtml(name)}</td>` +
        `<td class="metric-value">${value}</td></tr>`)
        .join("");
    return `<table class="metrics">${rows}</table>`;
}
/** Class buttons with their keyboard digits, in class-set order. */
export function renderLegend(classes) {
    const buttons = classes
        .map((name, index) => `<button class="class-btn" data-class="${escapeHtml(name)}">` +
        `<kbd>${index + 1}</kbd> ${escapeHtml(name)}</button>`)
        .join("");
    return `<div class="legend">${buttons}<button class="skip-btn"><kbd>s</kbd> skip</button></div>`;
}
export function renderProgress(progress) {
    const cells = progress
        .map((p) => {
        const pct = p.total === 0 ? 100 : Math.round((100 * p.done) / p.total);
        return (`<div class="cluster-progress" data-cluster="${p.cluster}">` +
            `<span>q${p.cluster}</span><progress max="100" value="${pct}"></progress>` +
            `<span>${p.done}/${p.total}</span></div>`);
    })
        .join("");
    return `<div class="progress">${cells}</div>`;
}
export function renderTask(task) {
    return (renderProgress(task.progress) +
        `<div class="meta"><strong>${escapeHtml(task.change_id)}</strong>` +
        ` cluster q${task.cluster} by ${escapeHtml(task.author)}` +
        `<p class="message">${escapeHtml(task.message)}</p></div>` +
        `<div class="task-body"><div class="diff">${renderDiff(task.files)}</div>` +
        `<aside>${renderMetrics(task.metrics)}</aside></div>` +
        renderLegend(task.classes));
}
/** Finalize screen: per-cluster tallies; ties highlighted. */
export function renderTally(clusters, unresolved = []) {
    const rows = clusters
        .map((c) => {
        const tallies = Object.entries(c.labels)
            .map(([name, count]) => `${escapeHtml(name)}: ${count}`)
            .join(", ");
        const flag = c.tied || unresolved.includes(c.cluster) ? ` class="tied"` : "";
        return `<tr${flag}><td>q${c.cluster}</td><td>${tallies}</td>` +
            `<td>${c.leader === null ? "tied" : escapeHtml(c.leader)}</td></tr>`;
    })
        .join("");
    return (`<table class="tally"><tr><th>cluster</th><th>labels</th><th>leader</th></tr>${rows}</table>` +
        `<button class="finalize-btn"><kbd>f</kbd> finalize mapping</button>`);
}
export function renderMapping(mapping) {
    const rows = Object.entries(mapping)
        .sort(([a], [b]) => Number(a) - Number(b))
        .map(([cluster, name]) => `<tr><td>q${cluster}</td><td>${escapeHtml(name)}</td></tr>`)
        .join("");
    return `<h2>mapping saved</h2><table class="mapping">${rows}</table>`;
}
