import { ApiError } from "./api.js";
import type { ChatClient } from "./api.js";
import { newConversation, sendTurn } from "./state.js";
import type { ConversationState, Turn } from "./types.js";

export interface ChatApp {
  state(): ConversationState;
  send(text: string): Promise<void>;
  reset(): void;
}

/**
 * Mount the chat interface under `root` and return handles used by both the
 * page bootstrap and the tests. All conversation data lives in this closure;
 * nothing is persisted.
 */
export function createApp(root: HTMLElement, client: ChatClient): ChatApp {
  root.innerHTML = `
    <div class="header">
      <span class="status-dot"></span>
      <h1>mkedg chat</h1>
      <button class="reset-button" type="button">Reset</button>
    </div>
    <div class="messages"></div>
    <form class="input-bar">
      <input class="chat-input" autocomplete="off" placeholder="Say something..." />
      <button class="send-button" type="submit">Send</button>
    </form>
  `;
  const dot = root.querySelector(".status-dot") as HTMLElement;
  const messages = root.querySelector(".messages") as HTMLElement;
  const form = root.querySelector(".input-bar") as HTMLFormElement;
  const input = root.querySelector(".chat-input") as HTMLInputElement;
  const sendButton = root.querySelector(".send-button") as HTMLButtonElement;
  const resetButton = root.querySelector(".reset-button") as HTMLButtonElement;

  let state = newConversation();
  let lastError: string | null = null;
  let busy = false;

  function render(): void {
    messages.replaceChildren();
    for (const turn of state.turns) {
      messages.appendChild(renderTurn(turn));
    }
    if (lastError !== null) {
      const bubble = document.createElement("div");
      bubble.className = "bubble error";
      bubble.textContent = lastError;
      messages.appendChild(bubble);
    }
    messages.scrollTop = messages.scrollHeight;
  }

  function setBusy(value: boolean): void {
    busy = value;
    input.disabled = value;
    sendButton.disabled = value;
  }

  async function send(raw: string): Promise<void> {
    const text = raw.trim();
    if (text === "" || busy) {
      return;
    }
    lastError = null;
    setBusy(true);
    try {
      state = await sendTurn(state, text, client);
      input.value = "";
    } catch (err) {
      lastError = describeError(err);
    } finally {
      setBusy(false);
      render();
      input.focus();
    }
  }

  function reset(): void {
    state = newConversation();
    lastError = null;
    input.value = "";
    render();
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void send(input.value);
  });
  resetButton.addEventListener("click", reset);

  if (client.health !== undefined) {
    void client.health().then((ok) => dot.classList.toggle("connected", ok));
  }
  render();

  return { state: () => state, send, reset };
}

function renderTurn(turn: Turn): HTMLElement {
  const bubble = document.createElement("div");
  bubble.className = `bubble ${turn.who}`;
  const text = document.createElement("span");
  text.className = "text";
  renderWords(turn, text);
  bubble.appendChild(text);
  if (turn.emotion !== undefined) {
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.textContent = turn.emotion;
    bubble.appendChild(badge);
  }
  return bubble;
}

function renderWords(turn: Turn, container: HTMLElement): void {
  const marks = new Set(turn.highlights ?? []);
  const words = turn.text.split(/\s+/).filter((word) => word !== "");
  words.forEach((word, i) => {
    if (i > 0) {
      container.appendChild(document.createTextNode(" "));
    }
    if (marks.has(normalizeWord(word))) {
      const mark = document.createElement("mark");
      mark.textContent = word;
      container.appendChild(mark);
    } else {
      container.appendChild(document.createTextNode(word));
    }
  });
}

/** Fold case and strip outer punctuation so surfaces match display words. */
function normalizeWord(word: string): string {
  return word
    .toLowerCase()
    .replace(/^[^\p{L}\p{N}]+/u, "")
    .replace(/[^\p{L}\p{N}]+$/u, "");
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `server error (${err.status}): ${err.message}`;
  }
  if (err instanceof Error) {
    return `request failed: ${err.message}`;
  }
  return "request failed";
}
