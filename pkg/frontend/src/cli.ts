/**
 * Figure rendering entry point.
 *
 * Usage:  node dist/cli.js --spec figure.json [--out override.svg]
 *
 * The spec file carries the input CSV path(s), grouping, labels, and output
 * path; see schema.ts. Exit codes: 0 success, 2 bad spec/schema, 1 runtime.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { renderBars } from "./render.js";
import { SchemaError, parseSummaryCsv, validateSpec } from "./schema.js";

function parseArgs(argv: string[]): { spec: string; out?: string } {
  let spec: string | undefined;
  let out: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--spec") spec = argv[++i];
    else if (argv[i] === "--out") out = argv[++i];
    else throw new SchemaError(`unknown argument ${argv[i]}`);
  }
  if (!spec) throw new SchemaError("missing required --spec <figure.json>");
  return { spec, out };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const specDir = path.dirname(args.spec);
    const spec = validateSpec(JSON.parse(fs.readFileSync(args.spec, "utf-8")));
    const inputs = Array.isArray(spec.inputCsv) ? spec.inputCsv : [spec.inputCsv];
    const rows = inputs.flatMap((p) =>
      parseSummaryCsv(fs.readFileSync(path.resolve(specDir, p), "utf-8")),
    );
    const svg = renderBars(rows, spec);
    const outPath = args.out ?? path.resolve(specDir, spec.output);
    fs.mkdirSync(path.dirname(outPath), { recursive: true });
    fs.writeFileSync(outPath, svg);
    console.log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof SyntaxError) {
      console.error(`spec/schema error: ${(err as Error).message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
