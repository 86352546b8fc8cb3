import { selectHighlights } from "./highlights.js";
export function newConversation() {
    return { turns: [] };
}
/** Texts of every turn in order, user and model alike. */
export function historyTexts(state) {
    return state.turns.map((turn) => turn.text);
}
/** True when turns alternate user/model starting with the user. */
export function isAlternating(state) {
    return state.turns.every((turn, i) => turn.who === (i % 2 === 0 ? "user" : "model"));
}
/**
 * Send one user message and return the state with the new exchange appended.
 * The input state is never modified, so a failed request leaves the
 * conversation exactly as it was; the error propagates to the caller.
 */
export async function sendTurn(state, text, client) {
    const trimmed = text.trim();
    if (trimmed === "") {
        throw new Error("message must not be empty");
    }
    const history = [...historyTexts(state), trimmed];
    const reply = await client.chat(history);
    const userTurn = { who: "user", text: trimmed };
    const modelTurn = {
        who: "model",
        text: reply.response,
        emotion: reply.emotion,
        highlights: selectHighlights(reply.copied_tokens),
    };
    return { turns: [...state.turns, userTurn, modelTurn] };
}
