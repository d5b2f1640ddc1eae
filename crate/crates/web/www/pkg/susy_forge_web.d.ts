/* tslint:disable */
/* eslint-disable */

export class PartnerView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Levels `j >= 2` whose partial Wronskian has a zero.
     */
    readonly singular_levels: Uint32Array;
    readonly v1: Float64Array;
    readonly v2: Float64Array;
    readonly x: Float64Array;
}

export class ProfileView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bound_ok: boolean;
    readonly case: number;
    readonly discriminant: Float64Array;
    readonly g: Float64Array;
    readonly lambda3: number;
    /**
     * `min (G - lambda_3)` over the window.
     */
    readonly min_gap: number;
    readonly sqrt_branch: Float64Array;
    readonly x: Float64Array;
}

/**
 * Verdict for an order-2 scenario.
 */
export function classify(text: string): string;

/**
 * Partner potential `V2` of the scenario.
 */
export function partner(text: string): PartnerView;

/**
 * G, its discriminant and square-root branch for an order-3 scenario.
 */
export function profile(text: string): ProfileView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_partnerview_free: (a: number, b: number) => void;
    readonly __wbg_profileview_free: (a: number, b: number) => void;
    readonly classify: (a: number, b: number) => [number, number, number, number];
    readonly partner: (a: number, b: number) => [number, number, number];
    readonly partnerview_singular_levels: (a: number) => [number, number];
    readonly partnerview_v1: (a: number) => [number, number];
    readonly partnerview_v2: (a: number) => [number, number];
    readonly partnerview_x: (a: number) => [number, number];
    readonly profile: (a: number, b: number) => [number, number, number];
    readonly profileview_bound_ok: (a: number) => number;
    readonly profileview_case: (a: number) => number;
    readonly profileview_discriminant: (a: number) => [number, number];
    readonly profileview_g: (a: number) => [number, number];
    readonly profileview_lambda3: (a: number) => number;
    readonly profileview_min_gap: (a: number) => number;
    readonly profileview_sqrt_branch: (a: number) => [number, number];
    readonly profileview_x: (a: number) => [number, number];
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
