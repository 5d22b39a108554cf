/* tslint:disable */
/* eslint-disable */

/**
 * The logistic metapopulation model with the parameters set in the page.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    equilibrium(m: number): Float64Array;
    meanfield(t: number, points: number, m: number): Float64Array;
    constructor(b: number, d: number, c: number, gamma: number, rho: number, kappa: number);
    simulate(n: number, t: number, points: number, m: number, seed: number): Float64Array;
    /**
     * Largest per-patch growth rate `w`; shown next to the sliders.
     */
    readonly growth_bound: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_equilibrium: (a: number, b: number) => [number, number, number, number];
    readonly demo_growth_bound: (a: number) => number;
    readonly demo_meanfield: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_simulate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
