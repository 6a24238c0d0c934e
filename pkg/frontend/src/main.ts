import { Client } from "./api.js";
import { SessionController } from "./controller.js";
import { renderSlate } from "./dom.js";

const params = new URLSearchParams(window.location.search);
const user = params.get("user") ?? "u1";
const base = params.get("service") ?? "http://127.0.0.1:8000";
const seed = Number(params.get("seed") ?? Date.now() % 2147483647);

const controller = new SessionController(new Client(base), user, seed);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

controller
  .load()
  .then(() => renderSlate(root, controller))
  .catch((err: unknown) => {
    root.textContent = `failed to load slate: ${String(err)}`;
  });

// retry queued ratings when connectivity returns
window.addEventListener("online", () => {
  void controller.flush().then(() => renderSlate(root, controller));
});
