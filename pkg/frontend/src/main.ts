/** Page entry point: read the API base from the form, mount the chat. */

import { createChatApp } from "./ui.js";

function mount(): void {
  const root = document.getElementById("chat-root");
  const baseInput = document.getElementById("api-base") as HTMLInputElement | null;
  const connect = document.getElementById("connect");
  if (root === null || baseInput === null || connect === null) {
    throw new Error("page skeleton is incomplete");
  }
  connect.addEventListener("click", () => {
    root.innerHTML = "";
    const app = createChatApp(root, { baseUrl: baseInput.value });
    void app.startNewSession();
  });
}

document.addEventListener("DOMContentLoaded", mount);
