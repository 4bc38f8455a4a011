/**
 * Request loop: hello once, then one result (or error) record per predict
 * record, in order, flushing after every line. Single-threaded on purpose;
 * the hello declares concurrent=false.
 */

import * as readline from "node:readline";
import type { Model } from "./models";
import { encode, parsePredict } from "./protocol";

function writeLine(out: NodeJS.WritableStream, line: string): Promise<void> {
  return new Promise((resolve, reject) => {
    out.write(line + "\n", (err) => (err ? reject(err) : resolve()));
  });
}

export async function serve(
  model: Model,
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
): Promise<void> {
  await writeLine(
    output,
    encode({
      type: "hello",
      d: model.d,
      task: model.task,
      labels: model.labels,
      concurrent: false,
    }),
  );
  for await (const line of readline.createInterface({ input })) {
    if (line.trim() === "") {
      continue;
    }
    let id: number | null = null;
    try {
      const request = parsePredict(line);
      id = request.id;
      for (const row of request.X) {
        if (row.length !== model.d) {
          throw new Error(
            `point of dimension ${row.length}, model expects ${model.d}`,
          );
        }
      }
      const y = model.predictBatch(request.X);
      await writeLine(output, encode({ type: "result", id, y }));
    } catch (err) {
      await writeLine(
        output,
        encode({ type: "error", id, message: String(err instanceof Error ? err.message : err) }),
      );
    }
  }
}
