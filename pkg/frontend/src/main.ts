import { ConsoleClient } from "./api.js";
import { Console } from "./console.js";

// ?api=http://host:port overrides; default assumes the harness serves us
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const ui = new Console(root, new ConsoleClient(base));
void ui.init().then(() => ui.start());
