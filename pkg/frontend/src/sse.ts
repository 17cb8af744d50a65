/**
 * Minimal server-sent-events reader for fetch response bodies.
 *
 * Yields the payload of each `data:` line as soon as its event block is
 * complete, regardless of how the network chunked the bytes.
 */

export async function* sseDataPayloads(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<string> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    while (true) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let boundary;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        for (const payload of dataLines(block)) yield payload;
      }
    }
    buffer += decoder.decode();
    for (const payload of dataLines(buffer)) yield payload;
  } finally {
    reader.releaseLock();
  }
}

function dataLines(block: string): string[] {
  const payloads: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("data:")) payloads.push(line.slice("data:".length).trim());
  }
  return payloads;
}
