/**
 * Scripted stand-in for the labeling service: serves a fixed task queue,
 * tallies posted labels, and finalizes by plurality exactly like the real
 * thing. Records every request so tests can assert call order.
 */
import { createServer } from "node:http";
export class MockServer {
    options;
    requests = [];
    labels = new Map();
    labelIds = [];
    finalizeTieOnce = false;
    pending;
    extraTasks = [];
    dropNext;
    server = null;
    clusterOf = new Map();
    constructor(options) {
        this.options = options;
        this.pending = [...options.tasks];
        this.dropNext = options.dropFirstLabelResponse ?? false;
        for (const task of options.tasks)
            this.clusterOf.set(task.change_id, task.cluster);
    }
    async start() {
        this.server = createServer((request, response) => {
            let body = "";
            request.on("data", (chunk) => (body += chunk));
            request.on("end", () => this.route(request.method ?? "", request.url ?? "", body, response));
        });
        await new Promise((resolve) => this.server.listen(0, "127.0.0.1", resolve));
        const address = this.server.address();
        return `http://127.0.0.1:${address.port}`;
    }
    stop() {
        this.server?.close();
    }
    queueExtra(task) {
        this.extraTasks.push(task);
        this.clusterOf.set(task.change_id, task.cluster);
    }
    route(method, url, body, response) {
        const path = url.split("?")[0];
        this.requests.push(`${method} ${path}`);
        const send = (status, payload) => {
            const text = payload === undefined ? "" : JSON.stringify(payload);
            response.writeHead(status, { "Content-Type": "application/json" });
            response.end(text);
        };
        if (method === "GET" && path === "/api/task/next") {
            const next = [...this.pending, ...this.extraTasks].find((t) => !this.labels.has(t.change_id));
            if (!next)
                return send(204);
            return send(200, next);
        }
        if (method === "POST" && path === "/api/label") {
            if (this.dropNext) {
                this.dropNext = false;
                response.socket?.destroy(); // simulate a dead connection mid-flight
                return;
            }
            const data = JSON.parse(body);
            this.labelIds.push(data.label_id);
            if (!this.labelIds.slice(0, -1).includes(data.label_id)) {
                this.labels.set(data.change_id, { class: data.class, expert: data.expert });
            }
            return send(201, { ok: true });
        }
        if (method === "POST" && path === "/api/skip") {
            const data = JSON.parse(body);
            const index = this.pending.findIndex((t) => t.change_id === data.change_id);
            if (index >= 0)
                this.pending.push(...this.pending.splice(index, 1));
            return send(200, { ok: true });
        }
        if (method === "GET" && path === "/api/clusters") {
            return send(200, { clusters: this.tally() });
        }
        if (method === "POST" && path === "/api/finalize") {
            if (this.finalizeTieOnce) {
                this.finalizeTieOnce = false;
                return send(409, { unresolved: [0], extra_representatives: {} });
            }
            const mapping = {};
            for (const row of this.tally()) {
                if (row.leader !== null)
                    mapping[String(row.cluster)] = row.leader;
            }
            return send(200, { mapping });
        }
        return send(404, { error: `no route ${method} ${path}` });
    }
    tally() {
        const byCluster = new Map();
        for (const [changeId, label] of this.labels) {
            const cluster = this.clusterOf.get(changeId) ?? -1;
            const counts = byCluster.get(cluster) ?? {};
            counts[label.class] = (counts[label.class] ?? 0) + 1;
            byCluster.set(cluster, counts);
        }
        return [...byCluster.entries()]
            .sort(([a], [b]) => a - b)
            .map(([cluster, labels]) => {
            const ranked = Object.entries(labels).sort((a, b) => b[1] - a[1]);
            const tied = ranked.length > 1 && ranked[0][1] === ranked[1][1];
            return {
                cluster,
                labels,
                leader: tied || !ranked.length ? null : ranked[0][0],
                tied,
            };
        });
    }
}
export function makeTask(changeId, cluster, classes) {
    return {
        change_id: changeId,
        cluster,
        message: `change ${changeId}`,
        author: "synth",
        timestamp: 0,
        files: [
            {
                path: "src/file.c",
                is_add: false,
                is_delete: false,
                hunks: [
                    {
                        old_start: 1,
                        new_start: 1,
                        added: ["added_line();"],
                        deleted: ["deleted_line();"],
                        modified: [["before_line();", "after_line();"]],
                    },
                ],
            },
        ],
        metrics: { loc_add: 1, loc_del: 1, loc_mod: 1 },
        classes,
        progress: [{ cluster, done: 0, total: 4 }],
    };
}
