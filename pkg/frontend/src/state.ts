import type { ChatClient } from "./api.js";
import { selectHighlights } from "./highlights.js";
import type { ConversationState, Turn } from "./types.js";

export function newConversation(): ConversationState {
  return { turns: [] };
}

/** Texts of every turn in order, user and model alike. */
export function historyTexts(state: ConversationState): string[] {
  return state.turns.map((turn) => turn.text);
}

/** True when turns alternate user/model starting with the user. */
export function isAlternating(state: ConversationState): boolean {
  return state.turns.every(
    (turn, i) => turn.who === (i % 2 === 0 ? "user" : "model"),
  );
}

/**
 * Send one user message and return the state with the new exchange appended.
 * The input state is never modified, so a failed request leaves the
 * conversation exactly as it was; the error propagates to the caller.
 */
export async function sendTurn(
  state: ConversationState,
  text: string,
  client: ChatClient,
): Promise<ConversationState> {
  const trimmed = text.trim();
  if (trimmed === "") {
    throw new Error("message must not be empty");
  }
  const history = [...historyTexts(state), trimmed];
  const reply = await client.chat(history);
  const userTurn: Turn = { who: "user", text: trimmed };
  const modelTurn: Turn = {
    who: "model",
    text: reply.response,
    emotion: reply.emotion,
    highlights: selectHighlights(reply.copied_tokens),
  };
  return { turns: [...state.turns, userTurn, modelTurn] };
}
