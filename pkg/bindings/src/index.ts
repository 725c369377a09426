/**
 * Columnar Node wrapper around the matchforge CLI.
 *
 * Everything numeric happens in the solver process; this module only
 * marshals columns to csv, invokes the CLI, and parses what it wrote
 * back. Solves run in a child process, so the event loop stays free
 * while they are in flight.
 *
 * The CLI is resolved from the MATCHFORGE_CLI environment variable
 * (whitespace-split, so "python3 -m matchforge.cli" works) and falls
 * back to `matchforge` on PATH.
 */

import { spawn } from "node:child_process";
import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import * as path from "node:path";
import Papa from "papaparse";

/** Units as parallel columns: one entry per unit in each array. */
export interface UnitColumns {
  ids: readonly string[];
  /** 1/true marks a treated unit, 0/false a control. */
  treat: readonly (boolean | 0 | 1)[];
  /** One inner array per covariate column, each of length ids.length. */
  covariates: readonly (readonly number[])[];
  /** Required by the score-abs-diff metric, ignored otherwise. */
  scores?: readonly number[];
}

/** Edge list as parallel columns; pairs not listed are forbidden. */
export interface EdgeColumns {
  treated_ids: readonly string[];
  control_ids: readonly string[];
  costs: readonly number[];
}

export type Metric =
  | "euclidean"
  | "standardized-euclidean"
  | "mahalanobis"
  | "score-abs-diff";

export type Method = "greedy" | "hungarian" | "optimal";

export type Order = "input-order" | "random" | "max-min-cost-first";

/** Solver options, named after the CLI flags. */
export interface MatchOptions {
  metric: Metric;
  method?: Method;
  /** Drop pairs with cost above this before solving. */
  caliper?: number;
  /** Controls per treated unit (greedy only). */
  k?: number;
  /** Allow control reuse (greedy only). */
  replacement?: boolean;
  /** Greedy processing order. */
  order?: Order;
  /** Seed for order "random". */
  seed?: number;
  /** Cost integerization digits for the exact solvers. */
  digits?: number;
}

export interface PairRecord {
  treated_id: string;
  control_id: string;
  cost: number;
}

export interface MatchOutput {
  /** Matched pairs in the order the CLI wrote them (sorted by id). */
  pairs: PairRecord[];
  /** The parsed summary report: totals, config echo, balance, trace. */
  summary: Record<string, unknown>;
}

export interface OracleOutput {
  m: number;
  pairs: PairRecord[];
  total_cost: number;
}

/** A request the solver rejected before reading data (CLI exit 2). */
export class UsageError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "UsageError";
  }
}

/** Malformed input or an infeasible instance (CLI exit 1). */
export class DataError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DataError";
  }
}

function cliCommand(): string[] {
  const spec = process.env.MATCHFORGE_CLI ?? "matchforge";
  const parts = spec.split(/\s+/).filter((p) => p.length > 0);
  if (parts.length === 0) {
    throw new UsageError("MATCHFORGE_CLI is set but empty");
  }
  return parts;
}

/** Pull the human part out of "usage: ...\nprog: error: <msg>" stderr. */
function errorText(stderr: string): string {
  const marker = stderr.lastIndexOf("error:");
  const text = marker >= 0 ? stderr.slice(marker + "error:".length) : stderr;
  return text.trim();
}

// cwd is the scratch dir and file args stay relative, so path echoes
// in the summary read "units.csv" no matter where the scratch dir is
function runCli(args: string[], cwd: string): Promise<void> {
  const [cmd, ...prefix] = cliCommand();
  return new Promise((resolve, reject) => {
    const child = spawn(cmd, [...prefix, ...args], {
      cwd,
      stdio: ["ignore", "pipe", "pipe"],
      env: { ...process.env, MPLBACKEND: "Agg" },
    });
    let stderr = "";
    child.stdout.resume();
    child.stderr.on("data", (chunk: Buffer) => {
      stderr += chunk.toString("utf8");
    });
    child.on("error", (err) => {
      reject(new Error(`could not launch ${cmd}: ${err.message}`));
    });
    child.on("close", (code) => {
      if (code === 0) {
        resolve();
      } else if (code === 2) {
        reject(new UsageError(errorText(stderr)));
      } else if (code === 1) {
        reject(new DataError(errorText(stderr)));
      } else {
        reject(new Error(`${cmd} exited with code ${code}: ${errorText(stderr)}`));
      }
    });
  });
}

function requireLength(name: string, actual: number, expected: number): void {
  if (actual !== expected) {
    throw new RangeError(`${name} has ${actual} entries for ${expected} ids`);
  }
}

function unitsCsv(columns: UnitColumns): string {
  const n = columns.ids.length;
  requireLength("treat", columns.treat.length, n);
  columns.covariates.forEach((col, d) => {
    requireLength(`covariate column ${d + 1}`, col.length, n);
  });
  if (columns.scores !== undefined) {
    requireLength("scores", columns.scores.length, n);
  }
  const fields = [
    "id",
    "treat",
    ...columns.covariates.map((_, d) => `x${d + 1}`),
    ...(columns.scores !== undefined ? ["score"] : []),
  ];
  const data = columns.ids.map((id, r) => [
    id,
    columns.treat[r] ? 1 : 0,
    ...columns.covariates.map((col) => col[r]),
    ...(columns.scores !== undefined ? [columns.scores[r]] : []),
  ]);
  return Papa.unparse({ fields, data }, { newline: "\n" }) + "\n";
}

function edgesCsv(edges: EdgeColumns): string {
  const n = edges.treated_ids.length;
  requireLength("control_ids", edges.control_ids.length, n);
  requireLength("costs", edges.costs.length, n);
  const data = edges.treated_ids.map((t, r) => [t, edges.control_ids[r], edges.costs[r]]);
  return Papa.unparse({ fields: ["treated_id", "control_id", "cost"], data }, { newline: "\n" }) + "\n";
}

function parsePairs(text: string): PairRecord[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  return parsed.data.map((row) => ({
    treated_id: row.treated_id,
    control_id: row.control_id,
    cost: Number(row.cost),
  }));
}

function matchArgs(options: MatchOptions, input: string, out: string, summary: string): string[] {
  const args = ["match", "--input", input, "--metric", options.metric, "--out", out, "--summary", summary];
  if (options.method !== undefined) args.push("--method", options.method);
  if (options.caliper !== undefined) args.push("--caliper", String(options.caliper));
  if (options.k !== undefined) args.push("--k", String(options.k));
  if (options.replacement) args.push("--replacement");
  if (options.order !== undefined) args.push("--order", options.order);
  if (options.seed !== undefined) args.push("--seed", String(options.seed));
  if (options.digits !== undefined) args.push("--digits", String(options.digits));
  return args;
}

async function inScratchDir<T>(body: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(path.join(tmpdir(), "matchforge-"));
  try {
    return await body(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

/**
 * Match treated units to controls and report balance.
 *
 * Columns are validated for equal length up front; everything else is
 * checked by the solver and surfaced as UsageError or DataError with
 * the CLI's own message.
 */
export async function match_units(columns: UnitColumns, options: MatchOptions): Promise<MatchOutput> {
  const csv = unitsCsv(columns);
  return inScratchDir(async (dir) => {
    await writeFile(path.join(dir, "units.csv"), csv, "utf8");
    await runCli(matchArgs(options, "units.csv", "pairs.csv", "summary.json"), dir);
    const pairs = parsePairs(await readFile(path.join(dir, "pairs.csv"), "utf8"));
    const summary = JSON.parse(
      await readFile(path.join(dir, "summary.json"), "utf8"),
    ) as Record<string, unknown>;
    return { pairs, summary };
  });
}

/**
 * Exhaustive optimum of cardinality m on a small edge list.
 *
 * Rejects instances too large to enumerate, same as the CLI.
 */
export async function oracle(edges: EdgeColumns, m: number): Promise<OracleOutput> {
  const csv = edgesCsv(edges);
  return inScratchDir(async (dir) => {
    await writeFile(path.join(dir, "edges.csv"), csv, "utf8");
    await runCli(["oracle", "--input", "edges.csv", "--m", String(m), "--out", "oracle.json"], dir);
    return JSON.parse(await readFile(path.join(dir, "oracle.json"), "utf8")) as OracleOutput;
  });
}
