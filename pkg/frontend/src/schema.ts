/**
 * Benchmark summary CSV schema and a strict reader for it.
 *
 * The backend emits one row per (environment label, design) with the
 * empirical MSE, its 95% confidence half-width, and run metadata. Unknown
 * or missing columns are hard errors so silently mislabeled data can never
 * reach a figure.
 */

export const SUMMARY_COLUMNS = [
  "design",
  "mse_mean",
  "ci_half_width",
  "reps",
  "env",
  "estimator",
  "truth",
  "seed",
] as const;

export interface SummaryRow {
  design: string;
  mseMean: number;
  ciHalfWidth: number;
  reps: number;
  env: string;
  estimator: string;
}

export class SchemaError extends Error {}

function splitCsvLine(line: string): string[] {
  return line.split(",").map((f) => f.trim());
}

/** Parse one summary CSV document (header + rows). */
export function parseSummaryCsv(text: string): SummaryRow[] {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("summary CSV is empty");
  }
  const header = splitCsvLine(lines[0]);
  const missing = SUMMARY_COLUMNS.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `summary CSV is missing required columns: ${missing.join(", ")}`,
    );
  }
  const index = new Map(header.map((name, i) => [name, i]));
  const rows: SummaryRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = splitCsvLine(lines[i]);
    if (fields.length !== header.length) {
      throw new SchemaError(
        `row ${i + 1} has ${fields.length} fields, header has ${header.length}`,
      );
    }
    const num = (name: string): number => {
      const raw = fields[index.get(name)!];
      const value = Number(raw);
      if (!Number.isFinite(value)) {
        throw new SchemaError(`row ${i + 1}: column ${name} is not numeric (${raw})`);
      }
      return value;
    };
    rows.push({
      design: fields[index.get("design")!],
      mseMean: num("mse_mean"),
      ciHalfWidth: num("ci_half_width"),
      reps: num("reps"),
      env: fields[index.get("env")!],
      estimator: fields[index.get("estimator")!],
    });
  }
  return rows;
}

/** Figure description: inputs, grouping, labels, output path. */
export interface FigureSpec {
  inputCsv: string | string[];
  /** Column whose distinct values form the bar groups (default "env"). */
  groupBy?: "env" | "design";
  title?: string;
  xLabel?: string;
  yLabel?: string;
  output: string;
}

export function validateSpec(spec: unknown): FigureSpec {
  if (typeof spec !== "object" || spec === null) {
    throw new SchemaError("figure spec must be an object");
  }
  const s = spec as Record<string, unknown>;
  if (typeof s.output !== "string" || s.output.length === 0) {
    throw new SchemaError("figure spec needs an 'output' path");
  }
  const input = s.inputCsv;
  const okString = typeof input === "string";
  const okList = Array.isArray(input) && input.every((x) => typeof x === "string");
  if (!okString && !okList) {
    throw new SchemaError("figure spec needs 'inputCsv' (string or string[])");
  }
  if (s.groupBy !== undefined && s.groupBy !== "env" && s.groupBy !== "design") {
    throw new SchemaError("groupBy must be 'env' or 'design'");
  }
  return {
    inputCsv: input as string | string[],
    groupBy: (s.groupBy as "env" | "design" | undefined) ?? "env",
    title: typeof s.title === "string" ? s.title : undefined,
    xLabel: typeof s.xLabel === "string" ? s.xLabel : undefined,
    yLabel: typeof s.yLabel === "string" ? s.yLabel : undefined,
    output: s.output,
  };
}
