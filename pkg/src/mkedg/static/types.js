// Shared shapes: the conversation model kept by the client and the JSON
// bodies exchanged with the inference service.
export {};
