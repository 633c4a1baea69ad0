/** Console bootstrap: session lifecycle, upload, send, what-if rerun. */

import { GatewayApiError, GatewayClient, type ModelCardWire } from "./api.js";
import {
  buildViewTurns,
  emptyState,
  fromSession,
  whatIfMessage,
  withDelta,
  type TranscriptState,
} from "./state.js";
import { PendingGate, renderTranscript, showToast } from "./ui.js";

const SESSION_KEY = "m3-session-id";

interface PendingAttachment {
  uri: string;
  name: string;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function ensureSession(client: GatewayClient): Promise<string> {
  const existing = sessionStorage.getItem(SESSION_KEY);
  if (existing) {
    try {
      await client.getSession(existing);
      return existing;
    } catch (error) {
      if (!(error instanceof GatewayApiError && error.status === 404)) throw error;
      sessionStorage.removeItem(SESSION_KEY);
    }
  }
  const created = await client.createSession();
  sessionStorage.setItem(SESSION_KEY, created.session_id);
  return created.session_id;
}

function uploadFormat(file: File): "png" | "jpeg" | "nii" | "raw-fixture" | null {
  const name = file.name.toLowerCase();
  if (name.endsWith(".png")) return "png";
  if (name.endsWith(".jpg") || name.endsWith(".jpeg")) return "jpeg";
  if (name.endsWith(".nii") || name.endsWith(".nii.gz")) return "nii";
  if (name.endsWith(".rawvol")) return "raw-fixture";
  return null;
}

export async function boot(): Promise<void> {
  const client = new GatewayClient(window.location.origin);
  const transcript = byId<HTMLElement>("transcript");
  const toasts = byId<HTMLElement>("toasts");
  const input = byId<HTMLTextAreaElement>("message-input");
  const sendButton = byId<HTMLButtonElement>("send-button");
  const fileInput = byId<HTMLInputElement>("file-input");
  const attachments = byId<HTMLElement>("attachments");
  const whatIfSelect = byId<HTMLSelectElement>("what-if-select");
  const whatIfButton = byId<HTMLButtonElement>("what-if-button");
  const promptView = byId<HTMLElement>("system-prompt");

  const sessionId = await ensureSession(client);
  // Reload-consistency: the initial state IS the gateway's stored session.
  let state: TranscriptState = emptyState();
  try {
    state = fromSession(await client.getSession(sessionId));
  } catch (error) {
    showToast(toasts, `failed to load session: ${String(error)}`);
  }
  renderTranscript(transcript, buildViewTurns(state));

  let segCards: ModelCardWire[] = [];
  try {
    const models = await client.getModels();
    promptView.textContent = models.system_prompt;
    segCards = models.registry.models.filter((card) => card.task === "segmentation");
    const args = segCards.flatMap((card) => card.valid_args);
    whatIfSelect.replaceChildren(
      ...args.map((arg) => {
        const option = document.createElement("option");
        option.value = arg;
        option.textContent = arg;
        return option;
      }),
    );
    const disabled = args.length === 0;
    whatIfSelect.disabled = disabled;
    whatIfButton.disabled = disabled;
  } catch (error) {
    showToast(toasts, `failed to load model cards: ${String(error)}`);
  }

  let pendingAttachments: PendingAttachment[] = [];
  const gate = new PendingGate(sendButton);

  function renderAttachments(): void {
    attachments.replaceChildren(
      ...pendingAttachments.map((attachment) => {
        const badge = document.createElement("span");
        badge.className = "attachment";
        badge.textContent = attachment.name;
        return badge;
      }),
    );
  }

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    fileInput.value = "";
    if (!file) return;
    const format = uploadFormat(file);
    if (!format) {
      showToast(toasts, `unsupported file type: ${file.name}`);
      return;
    }
    try {
      const uploaded = await client.uploadImage(sessionId, file, format);
      pendingAttachments.push({ uri: uploaded.image_uri, name: uploaded.name });
      renderAttachments();
    } catch (error) {
      if (error instanceof GatewayApiError) {
        showToast(toasts, `upload rejected [${error.code}]: ${error.message}`);
      } else {
        showToast(toasts, `upload failed: ${String(error)}`);
      }
    }
  });

  async function send(text: string): Promise<void> {
    if (!text.trim()) return;
    const images = pendingAttachments.map((attachment) => attachment.uri);
    try {
      await gate.run(async () => {
        const delta = await client.sendTurn(sessionId, text, images);
        state = withDelta(state, delta);
        pendingAttachments = [];
        renderAttachments();
        renderTranscript(transcript, buildViewTurns(state));
      });
    } catch (error) {
      if (error instanceof GatewayApiError) {
        showToast(toasts, `[${error.code}] ${error.message}${error.detail ? ` (${error.detail})` : ""}`);
        if (error.status === 404) {
          sessionStorage.removeItem(SESSION_KEY);
          showToast(toasts, "session expired; reload the page to start a new one");
        }
      } else {
        showToast(toasts, String(error));
      }
    }
  }

  sendButton.addEventListener("click", () => {
    const text = input.value;
    input.value = "";
    void send(text);
  });
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      sendButton.click();
    }
  });
  whatIfButton.addEventListener("click", () => {
    const argument = whatIfSelect.value;
    if (argument) void send(whatIfMessage(argument));
  });
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  void boot();
}
