import { readFileSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

/** Loads the real page markup into the test DOM so tests exercise the same
 * element wiring the browser gets (the module script tag is inert here). */
export function mountPage(): void {
  const here = path.dirname(fileURLToPath(import.meta.url));
  const html = readFileSync(path.join(here, "..", "static", "index.html"), "utf8");
  const body = /<body>([\s\S]*)<\/body>/.exec(html);
  if (!body) throw new Error("static/index.html has no <body>");
  document.body.innerHTML = body[1];
}

export async function until(
  predicate: () => boolean,
  timeoutMs: number,
  stepMs = 50,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, stepMs));
  }
  if (!predicate()) throw new Error(`condition not met within ${timeoutMs}ms`);
}
