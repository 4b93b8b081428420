/*
 * Portable AEAD kernel: AES-128-GCM envelope seal/open for wasm32.
 *
 * Freestanding (no libc); compiled with clang --target=wasm32. The JS
 * glue moves byte buffers through the exported bump allocator and calls
 * km_seal / km_open, which speak the same envelope binary layout as the
 * server-side kernel:
 *
 *   version(1)=0x01 || nonce(12) || ad_len(4, BE) || ad || tag(16) || ciphertext
 *
 * km_open verifies the tag over the whole ciphertext before a single
 * plaintext byte is written out (two-pass), so a tampered envelope
 * releases nothing.
 *
 * Build: ./build.sh  (clang + wasm-ld)
 */

#include <stdint.h>
#include <stddef.h>

#define EXPORT(name) __attribute__((export_name(name)))

#define VERSION 0x01
#define NONCE_LEN 12
#define TAG_LEN 16
#define HEADER_LEN (1 + NONCE_LEN + 4)

#define ERR_AUTH -1
#define ERR_MALFORMED -2
#define ERR_VERSION -3

/* ---- tiny libc ---------------------------------------------------------- */

void *memcpy(void *dst, const void *src, size_t n) {
    uint8_t *d = dst;
    const uint8_t *s = src;
    for (size_t i = 0; i < n; i++) d[i] = s[i];
    return dst;
}

void *memset(void *dst, int value, size_t n) {
    uint8_t *d = dst;
    for (size_t i = 0; i < n; i++) d[i] = (uint8_t)value;
    return dst;
}

/* ---- bump allocator ------------------------------------------------------ */

extern unsigned char __heap_base;
static uintptr_t heap_top;

EXPORT("km_alloc") void *km_alloc(uint32_t n) {
    if (heap_top == 0) heap_top = (uintptr_t)&__heap_base;
    heap_top = (heap_top + 15) & ~(uintptr_t)15;
    uintptr_t ptr = heap_top;
    heap_top += n;
    uintptr_t brk = (uintptr_t)__builtin_wasm_memory_size(0) * 65536;
    if (heap_top > brk) {
        uint32_t pages = (uint32_t)((heap_top - brk + 65535) / 65536);
        if (__builtin_wasm_memory_grow(0, pages) == (uintptr_t)-1) return 0;
    }
    return (void *)ptr;
}

EXPORT("km_reset") void km_reset(void) {
    heap_top = (uintptr_t)&__heap_base;
}

/* ---- AES-128 (encrypt direction only; GCM never needs the inverse) ------ */

static uint8_t SBOX[256];
static uint32_t TE0[256], TE1[256], TE2[256], TE3[256];
static int tables_ready;

static uint8_t xtime(uint8_t x) {
    return (uint8_t)((x << 1) ^ ((x & 0x80) ? 0x1b : 0));
}

static void build_tables(void) {
    /* S-box from GF(2^8) inversion (generator 3) plus the affine map. */
    uint8_t exp[256], log[256];
    uint8_t x = 1;
    for (int i = 0; i < 255; i++) {
        exp[i] = x;
        log[x] = (uint8_t)i;
        x = (uint8_t)(xtime(x) ^ x);
    }
    exp[255] = exp[0];
    for (int b = 0; b < 256; b++) {
        uint8_t inv = b ? exp[255 - log[b]] : 0;
        uint8_t s = inv;
        for (int r = 1; r <= 4; r++)
            s ^= (uint8_t)((inv << r) | (inv >> (8 - r)));
        SBOX[b] = (uint8_t)(s ^ 0x63);
    }
    for (int b = 0; b < 256; b++) {
        uint8_t s = SBOX[b];
        uint8_t s2 = xtime(s);
        uint8_t s3 = (uint8_t)(s2 ^ s);
        uint32_t w = ((uint32_t)s2 << 24) | ((uint32_t)s << 16) | ((uint32_t)s << 8) | s3;
        TE0[b] = w;
        TE1[b] = (w >> 8) | (w << 24);
        TE2[b] = (w >> 16) | (w << 16);
        TE3[b] = (w >> 24) | (w << 8);
    }
    tables_ready = 1;
}

static uint32_t load_be32(const uint8_t *p) {
    return ((uint32_t)p[0] << 24) | ((uint32_t)p[1] << 16) | ((uint32_t)p[2] << 8) | p[3];
}

static void store_be32(uint8_t *p, uint32_t v) {
    p[0] = (uint8_t)(v >> 24);
    p[1] = (uint8_t)(v >> 16);
    p[2] = (uint8_t)(v >> 8);
    p[3] = (uint8_t)v;
}

typedef struct {
    uint32_t rk[44];
} aes_key;

static void aes_expand(aes_key *ctx, const uint8_t key[16]) {
    if (!tables_ready) build_tables();
    uint32_t *rk = ctx->rk;
    for (int i = 0; i < 4; i++) rk[i] = load_be32(key + 4 * i);
    uint32_t rcon = 0x01000000;
    for (int i = 4; i < 44; i++) {
        uint32_t t = rk[i - 1];
        if (i % 4 == 0) {
            t = ((uint32_t)SBOX[(t >> 16) & 0xff] << 24) |
                ((uint32_t)SBOX[(t >> 8) & 0xff] << 16) |
                ((uint32_t)SBOX[t & 0xff] << 8) |
                (uint32_t)SBOX[t >> 24];
            t ^= rcon;
            rcon = (uint32_t)xtime((uint8_t)(rcon >> 24)) << 24;
        }
        rk[i] = rk[i - 4] ^ t;
    }
}

static void aes_encrypt_block(const aes_key *ctx, const uint8_t in[16], uint8_t out[16]) {
    const uint32_t *rk = ctx->rk;
    uint32_t s0 = load_be32(in) ^ rk[0];
    uint32_t s1 = load_be32(in + 4) ^ rk[1];
    uint32_t s2 = load_be32(in + 8) ^ rk[2];
    uint32_t s3 = load_be32(in + 12) ^ rk[3];
    uint32_t t0, t1, t2, t3;
    for (int round = 1; round < 10; round++) {
        t0 = TE0[s0 >> 24] ^ TE1[(s1 >> 16) & 0xff] ^ TE2[(s2 >> 8) & 0xff] ^ TE3[s3 & 0xff] ^ rk[4 * round];
        t1 = TE0[s1 >> 24] ^ TE1[(s2 >> 16) & 0xff] ^ TE2[(s3 >> 8) & 0xff] ^ TE3[s0 & 0xff] ^ rk[4 * round + 1];
        t2 = TE0[s2 >> 24] ^ TE1[(s3 >> 16) & 0xff] ^ TE2[(s0 >> 8) & 0xff] ^ TE3[s1 & 0xff] ^ rk[4 * round + 2];
        t3 = TE0[s3 >> 24] ^ TE1[(s0 >> 16) & 0xff] ^ TE2[(s1 >> 8) & 0xff] ^ TE3[s2 & 0xff] ^ rk[4 * round + 3];
        s0 = t0; s1 = t1; s2 = t2; s3 = t3;
    }
    t0 = ((uint32_t)SBOX[s0 >> 24] << 24) | ((uint32_t)SBOX[(s1 >> 16) & 0xff] << 16) |
         ((uint32_t)SBOX[(s2 >> 8) & 0xff] << 8) | SBOX[s3 & 0xff];
    t1 = ((uint32_t)SBOX[s1 >> 24] << 24) | ((uint32_t)SBOX[(s2 >> 16) & 0xff] << 16) |
         ((uint32_t)SBOX[(s3 >> 8) & 0xff] << 8) | SBOX[s0 & 0xff];
    t2 = ((uint32_t)SBOX[s2 >> 24] << 24) | ((uint32_t)SBOX[(s3 >> 16) & 0xff] << 16) |
         ((uint32_t)SBOX[(s0 >> 8) & 0xff] << 8) | SBOX[s1 & 0xff];
    t3 = ((uint32_t)SBOX[s3 >> 24] << 24) | ((uint32_t)SBOX[(s0 >> 16) & 0xff] << 16) |
         ((uint32_t)SBOX[(s1 >> 8) & 0xff] << 8) | SBOX[s2 & 0xff];
    store_be32(out, t0 ^ rk[40]);
    store_be32(out + 4, t1 ^ rk[41]);
    store_be32(out + 8, t2 ^ rk[42]);
    store_be32(out + 12, t3 ^ rk[43]);
}

/* ---- GHASH (4-bit Shoup tables, right-shift convention) ----------------- */

typedef struct {
    uint64_t hh[16];
    uint64_t hl[16];
} ghash_key;

static const uint64_t LAST4[16] = {
    0x0000, 0x1c20, 0x3840, 0x2460, 0x7080, 0x6ca0, 0x48c0, 0x54e0,
    0xe100, 0xfd20, 0xd940, 0xc560, 0x9180, 0x8da0, 0xa9c0, 0xb5e0,
};

static void ghash_init(ghash_key *g, const uint8_t h[16]) {
    uint64_t vh = ((uint64_t)load_be32(h) << 32) | load_be32(h + 4);
    uint64_t vl = ((uint64_t)load_be32(h + 8) << 32) | load_be32(h + 12);
    g->hh[8] = vh;
    g->hl[8] = vl;
    for (int i = 4; i > 0; i >>= 1) {
        uint32_t t = (uint32_t)(vl & 1) * 0xe1000000u;
        vl = (vh << 63) | (vl >> 1);
        vh = (vh >> 1) ^ ((uint64_t)t << 32);
        g->hh[i] = vh;
        g->hl[i] = vl;
    }
    for (int i = 2; i <= 8; i *= 2) {
        for (int j = 1; j < i; j++) {
            g->hh[i + j] = g->hh[i] ^ g->hh[j];
            g->hl[i + j] = g->hl[i] ^ g->hl[j];
        }
    }
    g->hh[0] = 0;
    g->hl[0] = 0;
}

static void ghash_mult(const ghash_key *g, uint8_t y[16]) {
    uint8_t lo = y[15] & 0xf;
    uint64_t zh = g->hh[lo];
    uint64_t zl = g->hl[lo];
    for (int i = 15; i >= 0; i--) {
        lo = y[i] & 0xf;
        uint8_t hi = y[i] >> 4;
        if (i != 15) {
            uint8_t rem = (uint8_t)(zl & 0xf);
            zl = (zh << 60) | (zl >> 4);
            zh = zh >> 4;
            zh ^= LAST4[rem] << 48;
            zh ^= g->hh[lo];
            zl ^= g->hl[lo];
        }
        uint8_t rem = (uint8_t)(zl & 0xf);
        zl = (zh << 60) | (zl >> 4);
        zh = zh >> 4;
        zh ^= LAST4[rem] << 48;
        zh ^= g->hh[hi];
        zl ^= g->hl[hi];
    }
    store_be32(y, (uint32_t)(zh >> 32));
    store_be32(y + 4, (uint32_t)zh);
    store_be32(y + 8, (uint32_t)(zl >> 32));
    store_be32(y + 12, (uint32_t)zl);
}

static void ghash_blocks(const ghash_key *g, uint8_t y[16], const uint8_t *data, uint32_t len) {
    for (uint32_t done = 0; done < len; done += 16) {
        uint32_t chunk = len - done < 16 ? len - done : 16;
        for (uint32_t i = 0; i < chunk; i++) y[i] ^= data[done + i];
        ghash_mult(g, y);
    }
}

/* ---- GCM ----------------------------------------------------------------- */

typedef struct {
    aes_key aes;
    ghash_key gh;
    uint8_t j0[16];
} gcm_ctx;

static void gcm_start(gcm_ctx *ctx, const uint8_t key[16], const uint8_t nonce[NONCE_LEN]) {
    aes_expand(&ctx->aes, key);
    uint8_t h[16] = {0};
    aes_encrypt_block(&ctx->aes, h, h);
    ghash_init(&ctx->gh, h);
    memcpy(ctx->j0, nonce, NONCE_LEN);
    ctx->j0[12] = 0;
    ctx->j0[13] = 0;
    ctx->j0[14] = 0;
    ctx->j0[15] = 1;
}

static void gcm_ctr(gcm_ctx *ctx, const uint8_t *in, uint8_t *out, uint32_t len) {
    uint8_t counter[16], ks[16];
    memcpy(counter, ctx->j0, 16);
    for (uint32_t done = 0; done < len; done += 16) {
        uint32_t c = load_be32(counter + 12) + 1;
        store_be32(counter + 12, c);
        aes_encrypt_block(&ctx->aes, counter, ks);
        uint32_t chunk = len - done < 16 ? len - done : 16;
        for (uint32_t i = 0; i < chunk; i++) out[done + i] = in[done + i] ^ ks[i];
    }
}

static void gcm_tag(gcm_ctx *ctx, const uint8_t *ad, uint32_t ad_len,
                    const uint8_t *ct, uint32_t ct_len, uint8_t tag[TAG_LEN]) {
    uint8_t y[16] = {0};
    ghash_blocks(&ctx->gh, y, ad, ad_len);
    ghash_blocks(&ctx->gh, y, ct, ct_len);
    uint8_t lens[16];
    uint64_t ad_bits = (uint64_t)ad_len * 8;
    uint64_t ct_bits = (uint64_t)ct_len * 8;
    store_be32(lens, (uint32_t)(ad_bits >> 32));
    store_be32(lens + 4, (uint32_t)ad_bits);
    store_be32(lens + 8, (uint32_t)(ct_bits >> 32));
    store_be32(lens + 12, (uint32_t)ct_bits);
    ghash_blocks(&ctx->gh, y, lens, 16);
    uint8_t ek[16];
    aes_encrypt_block(&ctx->aes, ctx->j0, ek);
    for (int i = 0; i < 16; i++) tag[i] = y[i] ^ ek[i];
}

/* ---- envelope API --------------------------------------------------------

   km_seal: writes version||nonce||ad_len||ad||tag||ct to out; returns the
   envelope length. out must hold HEADER_LEN + ad_len + TAG_LEN + pt_len.

   km_open: parses an envelope, verifies the tag over (nonce, ct, ad), and
   only then writes the plaintext to out. Returns the plaintext length, or
   a negative error code. */

EXPORT("km_seal")
int32_t km_seal(const uint8_t *key, const uint8_t *nonce,
                const uint8_t *ad, uint32_t ad_len,
                const uint8_t *pt, uint32_t pt_len, uint8_t *out) {
    gcm_ctx ctx;
    gcm_start(&ctx, key, nonce);
    uint8_t *ct = out + HEADER_LEN + ad_len + TAG_LEN;
    gcm_ctr(&ctx, pt, ct, pt_len);
    out[0] = VERSION;
    memcpy(out + 1, nonce, NONCE_LEN);
    store_be32(out + 1 + NONCE_LEN, ad_len);
    memcpy(out + HEADER_LEN, ad, ad_len);
    gcm_tag(&ctx, ad, ad_len, ct, pt_len, out + HEADER_LEN + ad_len);
    return (int32_t)(HEADER_LEN + ad_len + TAG_LEN + pt_len);
}

EXPORT("km_open")
int32_t km_open(const uint8_t *key, const uint8_t *env, uint32_t env_len, uint8_t *out) {
    if (env_len < HEADER_LEN + TAG_LEN) return ERR_MALFORMED;
    if (env[0] != VERSION) return ERR_VERSION;
    const uint8_t *nonce = env + 1;
    uint32_t ad_len = load_be32(env + 1 + NONCE_LEN);
    if (env_len < (uint64_t)HEADER_LEN + ad_len + TAG_LEN) return ERR_MALFORMED;
    const uint8_t *ad = env + HEADER_LEN;
    const uint8_t *tag = ad + ad_len;
    const uint8_t *ct = tag + TAG_LEN;
    uint32_t ct_len = env_len - HEADER_LEN - ad_len - TAG_LEN;

    gcm_ctx ctx;
    gcm_start(&ctx, key, nonce);
    uint8_t expected[TAG_LEN];
    gcm_tag(&ctx, ad, ad_len, ct, ct_len, expected);
    uint8_t diff = 0;
    for (int i = 0; i < TAG_LEN; i++) diff |= (uint8_t)(expected[i] ^ tag[i]);
    if (diff) return ERR_AUTH;

    gcm_ctr(&ctx, ct, out, ct_len);
    return (int32_t)ct_len;
}

EXPORT("km_version") int32_t km_version(void) {
    return VERSION;
}
