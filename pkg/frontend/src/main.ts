// Page bootstrap: pick a service address and a plan, then hand the live
// session to the workbench view.

import { SessionApi } from "./api";
import { WorkbenchController } from "./controller";
import { WorkbenchStore } from "./state";
import { WorkbenchView } from "./view";

function mount(): void {
  const addressInput = document.getElementById("service-address") as HTMLInputElement;
  const planSelect = document.getElementById("plan-select") as HTMLSelectElement;
  const connectButton = document.getElementById("connect") as HTMLButtonElement;
  const status = document.getElementById("connect-status") as HTMLElement;
  const root = document.getElementById("workbench") as HTMLElement;

  addressInput.value = window.location.origin;

  async function refreshPlans(): Promise<void> {
    status.textContent = "";
    planSelect.textContent = "";
    try {
      const api = new SessionApi(addressInput.value.replace(/\/$/, ""));
      for (const plan of await api.listPlans()) {
        const option = document.createElement("option");
        option.value = plan.plan_id;
        option.textContent = `${plan.plan_id} (${plan.stage_count} stages)`;
        planSelect.appendChild(option);
      }
      if (!planSelect.options.length) {
        status.textContent = "service reachable but offers no plans";
      }
    } catch (error) {
      status.textContent = `cannot reach service: ${(error as Error).message}`;
    }
  }

  addressInput.addEventListener("change", () => void refreshPlans());
  void refreshPlans();

  connectButton.addEventListener("click", async () => {
    const base = addressInput.value.replace(/\/$/, "");
    const api = new SessionApi(base);
    const store = new WorkbenchStore();
    const controller = new WorkbenchController(api, store);
    new WorkbenchView(root, store, {
      placePart: (part, zone) => void controller.placePart(part, zone).catch(report),
      removePart: (part, zone) => void controller.removePart(part, zone).catch(report),
      showConnection: (connection, leading, aux) =>
        void controller.showConnection(connection, leading, aux).catch(report),
      timelineHref: (sessionId) => `${base}/sessions/${sessionId}/timeline`,
    });
    function report(error: Error): void {
      status.textContent = error.message;
    }
    try {
      await controller.connect(planSelect.value);
      status.textContent = "";
    } catch (error) {
      status.textContent = `connect failed: ${(error as Error).message}`;
    }
  });
}

mount();
