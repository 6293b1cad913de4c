/**
 * Typed client for the labeling service.
 *
 * Label POSTs carry a client-generated label id and are retried until the
 * server confirms with 201, so a dropped response never loses or doubles
 * a label. A retry callback lets the UI show a banner while offline.
 */
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
const sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));
export class ApiClient {
    base;
    expert;
    retryDelayMs;
    maxRetries;
    onRetry;
    serial = 0;
    constructor(options) {
        this.base = options.base ?? "";
        this.expert = options.expert;
        this.retryDelayMs = options.retryDelayMs ?? 1000;
        this.maxRetries = options.maxRetries ?? 30;
        this.onRetry = options.onRetry ?? (() => undefined);
    }
    async session() {
        return this.json(await fetch(`${this.base}/api/session?expert=${this.expert}`));
    }
    /** Next unlabeled representative, or null when every cluster is done. */
    async nextTask() {
        const response = await fetch(`${this.base}/api/task/next?expert=${this.expert}`);
        if (response.status === 204)
            return null;
        return this.json(response);
    }
    /** Resolves only after the server has acknowledged the label with 201. */
    async postLabel(changeId, className) {
        const labelId = `${this.expert}-${changeId}-${this.serial++}`;
        const body = JSON.stringify({
            change_id: changeId,
            class: className,
            expert: this.expert,
            label_id: labelId,
        });
        for (let attempt = 0;; attempt++) {
            try {
                const response = await fetch(`${this.base}/api/label`, {
                    method: "POST",
                    headers: { "Content-Type": "application/json" },
                    body,
                });
                if (response.status === 201)
                    return;
                throw new ApiError(response.status, await response.text());
            }
            catch (error) {
                if (error instanceof ApiError)
                    throw error; // 4xx: caller bug, no retry
                if (attempt >= this.maxRetries)
                    throw error;
                this.onRetry(attempt + 1);
                await sleep(this.retryDelayMs);
            }
        }
    }
    async skip(changeId) {
        await fetch(`${this.base}/api/skip`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ change_id: changeId, expert: this.expert }),
        });
    }
    async clusters() {
        return this.json(await fetch(`${this.base}/api/clusters`));
    }
    async finalize() {
        const response = await fetch(`${this.base}/api/finalize`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: "{}",
        });
        const payload = await response.json();
        if (response.status === 200)
            return { ok: true, mapping: payload.mapping };
        if (response.status === 409)
            return { ok: false, unresolved: payload.unresolved };
        throw new ApiError(response.status, JSON.stringify(payload));
    }
    async json(response) {
        if (!response.ok)
            throw new ApiError(response.status, await response.text());
        return response.json();
    }
}
