/**
 * CLI: serve --model <path> [--task <classification|regression>]
 *
 * On model-load failure an error record is emitted before the nonzero exit,
 * so the host sees a diagnosable line instead of a silent crash.
 */

import { loadModel } from "./models";
import { encode } from "./protocol";
import { serve } from "./serve";

interface Args {
  model: string;
  task?: string;
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== "serve") {
    throw new Error(`usage: main.js serve --model <path> [--task <task>]`);
  }
  let model: string | undefined;
  let task: string | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`flag ${flag} needs a value`);
    }
    if (flag === "--model") {
      model = value;
    } else if (flag === "--task") {
      if (value !== "classification" && value !== "regression") {
        throw new Error(`unknown task ${value}`);
      }
      task = value;
    } else {
      throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!model) {
    throw new Error("--model is required");
  }
  return { model, task };
}

async function main(): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    process.stderr.write(String(err instanceof Error ? err.message : err) + "\n");
    return 2;
  }
  try {
    const model = loadModel(args.model, args.task);
    await serve(model, process.stdin, process.stdout);
    return 0;
  } catch (err) {
    const message = String(err instanceof Error ? err.message : err);
    process.stdout.write(encode({ type: "error", id: null, message }) + "\n");
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
