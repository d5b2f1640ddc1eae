/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_partnerview_free: (a: number, b: number) => void;
export const __wbg_profileview_free: (a: number, b: number) => void;
export const classify: (a: number, b: number) => [number, number, number, number];
export const partner: (a: number, b: number) => [number, number, number];
export const partnerview_singular_levels: (a: number) => [number, number];
export const partnerview_v1: (a: number) => [number, number];
export const partnerview_v2: (a: number) => [number, number];
export const partnerview_x: (a: number) => [number, number];
export const profile: (a: number, b: number) => [number, number, number];
export const profileview_bound_ok: (a: number) => number;
export const profileview_case: (a: number) => number;
export const profileview_discriminant: (a: number) => [number, number];
export const profileview_g: (a: number) => [number, number];
export const profileview_lambda3: (a: number) => number;
export const profileview_min_gap: (a: number) => number;
export const profileview_sqrt_branch: (a: number) => [number, number];
export const profileview_x: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
