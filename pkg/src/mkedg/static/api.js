export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
/** Thin JSON client; the fetch implementation is injectable for tests. */
export class HttpChatClient {
    constructor(baseUrl = "", fetchImpl = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
    }
    async chat(history) {
        const res = await this.fetchImpl(`${this.baseUrl}/api/chat`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ history }),
        });
        if (!res.ok) {
            throw new ApiError(res.status, await readErrorMessage(res));
        }
        return (await res.json());
    }
    async health() {
        try {
            const res = await this.fetchImpl(`${this.baseUrl}/api/health`);
            if (!res.ok) {
                return false;
            }
            const body = (await res.json());
            return body.status === "ok";
        }
        catch {
            return false;
        }
    }
}
async function readErrorMessage(res) {
    try {
        const body = (await res.json());
        if (typeof body.error === "string") {
            return body.error;
        }
    }
    catch {
        // non-JSON error body; fall back to the status line
    }
    return `request failed with status ${res.status}`;
}
