// Shared shapes: the conversation model kept by the client and the JSON
// bodies exchanged with the inference service.

export type Speaker = "user" | "model";

export interface Turn {
  who: Speaker;
  text: string;
  emotion?: string;
  highlights?: string[];
}

export interface ConversationState {
  turns: Turn[];
}

export interface ConceptLink {
  token: string;
  concept: string;
  score: number;
}

export interface CopiedToken {
  position: number;
  surface: string;
  copy_weight: number;
}

export interface ChatResponse {
  response: string;
  emotion: string;
  emotion_distribution: Record<string, number>;
  concepts: ConceptLink[];
  copied_tokens: CopiedToken[];
}
