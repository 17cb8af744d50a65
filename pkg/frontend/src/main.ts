/** DOM wiring; all behavior lives in SessionController. */

import { ServiceClient } from "./api.js";
import { renderMarkdown } from "./markdown.js";
import { SessionController } from "./session.js";

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing element #${id}`);
  return element as T;
}

const apiBase = new URLSearchParams(location.search).get("api") ?? "";
const session = new SessionController(new ServiceClient(apiBase));

const paperInput = byId<HTMLTextAreaElement>("paper-text");
const fileInput = byId<HTMLInputElement>("pdf-file");
const templateSelect = byId<HTMLSelectElement>("template-select");
const templateInput = byId<HTMLTextAreaElement>("template-text");
const saveTemplateButton = byId<HTMLButtonElement>("save-template");
const generateButton = byId<HTMLButtonElement>("generate");
const statusLine = byId<HTMLSpanElement>("status");
const reviewPane = byId<HTMLDivElement>("review");
const rawToggle = byId<HTMLInputElement>("raw-toggle");

let editingTemplate = false;

session.subscribe((state) => {
  generateButton.disabled = !session.canGenerate();
  statusLine.textContent =
    state.status + (state.errorMessage ? ` — ${state.errorMessage}` : "");
  statusLine.className = state.status;
  if (document.activeElement !== paperInput) paperInput.value = state.paperText;
  if (!editingTemplate) templateInput.value = state.templateText;
  if (rawToggle.checked) {
    reviewPane.textContent = state.review;
  } else {
    reviewPane.innerHTML = renderMarkdown(state.review);
  }
});

paperInput.addEventListener("input", () => session.setPaperText(paperInput.value));
templateInput.addEventListener("focus", () => (editingTemplate = true));
templateInput.addEventListener("blur", () => (editingTemplate = false));
rawToggle.addEventListener("change", () => session.setPaperText(paperInput.value));

fileInput.addEventListener("change", () => {
  const file = fileInput.files?.[0];
  if (file) void session.uploadAndConvert(file, file.name);
});

templateSelect.addEventListener("change", () => {
  void session.loadTemplate(templateSelect.value);
});

saveTemplateButton.addEventListener("click", () => {
  void session.saveTemplate(templateInput.value).catch((error) => {
    statusLine.textContent = `error — ${error instanceof Error ? error.message : error}`;
  });
});

generateButton.addEventListener("click", () => {
  void session.generate().catch(() => {
    // the status line already reflects the error frame
  });
});

async function boot(): Promise<void> {
  const client = new ServiceClient(apiBase);
  const templates = await client.listTemplates();
  templateSelect.innerHTML = "";
  for (const template of templates) {
    const option = document.createElement("option");
    option.value = template.venue_id;
    option.textContent = template.venue_id;
    templateSelect.append(option);
  }
  const first = templates[0];
  if (first) await session.loadTemplate(first.venue_id);
}

void boot();
