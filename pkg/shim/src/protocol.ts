/**
 * Record types of the newline-delimited JSON oracle protocol.
 *
 * One record per line, UTF-8, flushed per record:
 *   hello   (shim -> host): {"type":"hello","d":...,"task":...,"labels":...,"concurrent":false}
 *   predict (host -> shim): {"type":"predict","id":...,"X":[[...],...]}
 *   result  (shim -> host): {"type":"result","id":...,"y":[...]}
 *   error   (shim -> host): {"type":"error","id":...,"message":...}
 */

export type Task = "classification" | "regression";

export interface HelloRecord {
  type: "hello";
  d: number;
  task: Task;
  labels: number[] | null;
  concurrent: boolean;
}

export interface PredictRecord {
  type: "predict";
  id: number;
  X: number[][];
}

export interface ResultRecord {
  type: "result";
  id: number;
  y: number[];
}

export interface ErrorRecord {
  type: "error";
  id: number | null;
  message: string;
}

export function encode(record: HelloRecord | ResultRecord | ErrorRecord): string {
  // JSON.stringify keeps insertion order, so field order is pinned here
  return JSON.stringify(record);
}

export function parsePredict(line: string): PredictRecord {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (err) {
    throw new Error(`unparseable record: ${String(err)}`);
  }
  const record = doc as Partial<PredictRecord>;
  if (record.type !== "predict") {
    throw new Error(`expected a predict record, got type=${String(record.type)}`);
  }
  if (typeof record.id !== "number" || !Number.isInteger(record.id)) {
    throw new Error("predict record lacks an integer id");
  }
  if (!Array.isArray(record.X) || !record.X.every((row) => Array.isArray(row))) {
    throw new Error("predict record lacks a points matrix");
  }
  return record as PredictRecord;
}
