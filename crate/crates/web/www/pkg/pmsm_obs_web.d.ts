/* tslint:disable */
/* eslint-disable */

/**
 * Observability at a steady operating point given in rotor coordinates.
 *
 * Returns `det_y1, det_y2, det_y3, rank, psi_o_d, psi_o_q, margin,
 * sigma_1..sigma_4`.
 */
export function analyze_point(machine: string, i_d: number, i_q: number, omega: number, theta: number): Float64Array;

/**
 * Injection determinant of the surface-magnet machine over a grid of
 * position errors in `[-π, π]` (rows) and times in one carrier period
 * (columns), with a d̂-axis voltage of `v_hf` volts at `freq_hz`.
 */
export function hfi_map(v_hf: number, freq_hz: number, omega: number, n_err: number, n_t: number): Float64Array;

/**
 * Runs the reference scenario with the given initial position error (rad)
 * and q-axis injection amplitude (A), keeping every `every`-th sample.
 *
 * Rows: `t, theta_err, omega_err, omega_true, rank, det_y1`. A run that
 * stops early returns the rows computed so far.
 */
export function simulate(machine: string, theta_err0: number, injection_amplitude: number, every: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly analyze_point: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly hfi_map: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
