import { HttpChatClient } from "./api.js";
import { createApp } from "./ui.js";
const root = document.getElementById("app");
if (root !== null) {
    createApp(root, new HttpChatClient());
}
