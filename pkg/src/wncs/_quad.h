/* Widest available float for the RVI sweep: binary128 where gcc/clang offer it. */
#ifndef WNCS_QUAD_H
#define WNCS_QUAD_H
#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
typedef __float128 wncs_quad;
#define WNCS_QUAD_DIGITS 34
#else
typedef long double wncs_quad;
#define WNCS_QUAD_DIGITS 18
#endif
#endif
