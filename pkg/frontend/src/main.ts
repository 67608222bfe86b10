/** DOM wiring: renders the controller's screen and forwards clicks to it. */

import { SurveyClient } from "./api.js";
import { PAIRS_PER_SESSION, SessionController } from "./state.js";
import type { Screen } from "./state.js";
import type { FirmCard } from "./api.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

const screens: Record<Screen["kind"], HTMLElement> = {
  register: byId("register-screen"),
  voting: byId("voting-screen"),
  complete: byId("complete-screen"),
  error: byId("error-screen"),
};
const registerForm = byId<HTMLFormElement>("register-form");
const certifiedBox = byId<HTMLInputElement>("certified");
const stateInput = byId<HTMLInputElement>("state");
const progress = byId<HTMLElement>("progress");
const cardA = byId<HTMLButtonElement>("card-a");
const cardB = byId<HTMLButtonElement>("card-b");
const submitButton = byId<HTMLButtonElement>("submit-vote");
const anotherButton = byId<HTMLButtonElement>("another-session");
const retryButton = byId<HTMLButtonElement>("retry");
const errorMessage = byId<HTMLElement>("error-message");

const controller = new SessionController(new SurveyClient(""), window.localStorage);

function fillCard(card: HTMLButtonElement, firm: FirmCard, selected: boolean): void {
  (card.querySelector(".ticker") as HTMLElement).textContent = firm.ticker;
  (card.querySelector(".name") as HTMLElement).textContent = firm.name;
  card.classList.toggle("selected", selected);
}

function render(screen: Screen): void {
  for (const el of Object.values(screens)) el.hidden = true;
  screens[screen.kind].hidden = false;
  if (screen.kind === "voting") {
    const { pair, selected, inFlight } = screen;
    progress.textContent = `Pair ${pair.pair_index + 1} of ${PAIRS_PER_SESSION}`;
    fillCard(cardA, pair.firm_a, selected === pair.firm_a.id);
    fillCard(cardB, pair.firm_b, selected === pair.firm_b.id);
    cardA.disabled = inFlight;
    cardB.disabled = inFlight;
    submitButton.disabled = selected === null || inFlight;
    submitButton.textContent = inFlight ? "Recording..." : "Submit choice";
  } else if (screen.kind === "error") {
    errorMessage.textContent = screen.message;
  }
}

controller.subscribe(render);

registerForm.addEventListener("submit", (ev) => {
  ev.preventDefault();
  void controller.register(certifiedBox.checked, stateInput.value.trim().toUpperCase());
});
cardA.addEventListener("click", () => {
  const screen = controller.current;
  if (screen.kind === "voting") controller.select(screen.pair.firm_a.id);
});
cardB.addEventListener("click", () => {
  const screen = controller.current;
  if (screen.kind === "voting") controller.select(screen.pair.firm_b.id);
});
submitButton.addEventListener("click", () => void controller.submit());
anotherButton.addEventListener("click", () => void controller.anotherSession());
retryButton.addEventListener("click", () => void controller.start());

render(controller.current);
void controller.start();
