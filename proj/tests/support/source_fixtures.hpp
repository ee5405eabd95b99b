#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace clbforge::testing {

struct SourceFixture {
  std::string_view name;
  std::string_view source;
  std::size_t qcs;
  std::size_t eligible;
  std::map<std::string, std::size_t> skips;
};

inline constexpr std::string_view kListingSource = R"C(#include <stdio.h>
#define CONST 7

int funA(int value);

void funB(int val) {
    int a = 0;
    /* QC */
    if (a == CONST) {
        /* or_code */
        int res = funA(val);
        printf("The result is %d\n", res);
    }
}
)C";

inline constexpr std::string_view kCommandLoopSource = R"C(#include <stdio.h>
#define CMD_ON 1
#define CMD_OFF 2
#define BIG 100000

struct sample { int v; };
static int state;

static int step(int cmd, int *out, long wide)
{
    struct sample s;
    int i;
    s.v = 0;
    if (cmd == CMD_ON) {
        *out = 1;
        state = 1;
    }
    if (CMD_OFF == cmd) {
        return 0;
    }
    if (cmd == 3) {
        s.v = 3;
    }
    if (wide == 5) {
        state = 5;
    }
    for (i = 0; i < 4; i++) {
        if (cmd == 4) {
            break;
        }
        if (cmd == 6) {
            int k;
            for (k = 0; k < 2; k++) {
                if (k == 1) break;
            }
            state += k;
        }
    }
    if (cmd < 5) { state = 2; }
    if (cmd == BIG) { state = 9; }
    return state;
}
)C";

inline constexpr std::string_view kPreprocessorSource = R"C(#define MODE 2
int g;

void f(int x)
{
    if (x == MODE) {
#ifdef DEBUG
        g = 1;
#endif
        g = 2;
    }
    if (x == 9) {
        g = 3;
    }
#if MODE
    if (x == 10) { g = 4; }
#endif
    if (x == 11) {
#define LOCAL_CONST 3
        g = LOCAL_CONST;
    }
}
)C";

inline constexpr std::string_view kGotoSource = R"C(int flag;

void h(int v)
{
    if (v == 1) {
        goto done;
    }
    if (v == 2) {
        goto inner;
        flag = 0;
inner:
        flag = 2;
    }
    if (v == 3) {
        flag = 3;
    again:
        flag++;
    }
    if (flag == 4) goto again;
done:
    flag = 0;
}
)C";

inline constexpr std::string_view kOperandSource = R"C(#define NEG (-5)
#define SHIFTED (1 << 4)
#define F(x) ((x) + 1)
#define NAME "abc"
unsigned char port;

void e(unsigned char c, short s, int *p, int arr[4], float fl)
{
    if (c == 'A') { port = 1; }
    if (s == NEG) { port = 2; }
    if (*p == SHIFTED) { port = 3; }
    if (arr[1] == 0x10) { port = 4; }
    if (fl == 2) { port = 5; }
    if (p == 0) { port = 6; }
    if (c == F(1)) { port = 7; }
    if (c == 5 && s == 2) { port = 8; }
    if (c == 0x100000000) { port = 9; }
    if (c == s) { port = 10; }
    if (port == 4294967295u) { port = 11; }
}
)C";

inline constexpr std::string_view kDeclarationsOnlySource = R"C(int f(int);
extern int g;
struct point { int x, y; };
)C";

inline const std::vector<SourceFixture>& source_fixtures() {
  static const std::vector<SourceFixture> fixtures = {
      {"listing", kListingSource, 1, 1, {}},
      {"command_loop", kCommandLoopSource, 7, 3, {{"ControlFlowEscape", 2}, {"UnsupportedVariable", 1}, {"UnsupportedOperand", 1}}},
      {"preprocessor", kPreprocessorSource, 3, 2, {{"PreprocessorDirective", 1}}},
      {"goto", kGotoSource, 4, 1, {{"ControlFlowEscape", 2}, {"ExternalLabelTarget", 1}}},
      {"operands", kOperandSource, 7, 5, {{"UnsupportedOperand", 2}}},
      {"declarations_only", kDeclarationsOnlySource, 0, 0, {}},
  };
  return fixtures;
}

}  // namespace clbforge::testing
