// Entry point: wire the session controller to the DOM and the keyboard.

import { ApiClient } from "./api.js";
import { Renderer } from "./render.js";
import { SessionController } from "./state.js";

function required(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id} in index.html`);
  return el;
}

const api = new ApiClient("");
let renderer: Renderer;

const controller = new SessionController(api, (state) => renderer.apply(state));

renderer = new Renderer(
  {
    status: required("status"),
    clips: required("clips"),
    controls: required("controls"),
    statsPanel: required("stats"),
    sparkline: required("sparkline") as HTMLCanvasElement,
  },
  (classIndex) => void controller.submitRating(classIndex),
  (side) => void controller.submitPreference(side),
);

document.addEventListener("keydown", (event) => {
  if (event.key >= "0" && event.key <= "9") {
    void controller.submitRating(Number(event.key));
  } else if (event.key === "ArrowLeft") {
    void controller.submitPreference("first");
  } else if (event.key === "ArrowRight") {
    void controller.submitPreference("second");
  }
});

setInterval(() => void controller.refreshStats(), 2000);
void controller.start();
