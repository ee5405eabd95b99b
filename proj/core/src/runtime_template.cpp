#include "clbforge/runtime_template.hpp"

namespace clbforge {
namespace {

// Keep in sync with crypto.cpp: cond_hash = fnv1a32(le32(salt) || le32(x)),
// xor key = le32(key).
constexpr std::string_view kRuntime = R"C(/* clbforge:protected */
#ifndef CLBFORGE_RUNTIME_INCLUDED
#define CLBFORGE_RUNTIME_INCLUDED
#ifndef _DEFAULT_SOURCE
#define _DEFAULT_SOURCE 1
#endif
#include <fcntl.h>
#include <stdint.h>
#include <sys/mman.h>
#include <unistd.h>

__attribute__((unused, noreturn)) static void clb_detected(void)
{
    static const char msg[] = "TAMPERING DETECTED\n";
    ssize_t ignored = write(2, msg, sizeof msg - 1);
    (void)ignored;
    _exit(42);
}

__attribute__((unused)) static unsigned clb_fnv1a(unsigned h, const unsigned char *p, unsigned long n)
{
    unsigned long i;
    for (i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x01000193u;
    }
    return h;
}

__attribute__((unused)) static unsigned clb_hash(unsigned x, unsigned salt)
{
    unsigned char b[8];
    b[0] = (unsigned char)salt;
    b[1] = (unsigned char)(salt >> 8);
    b[2] = (unsigned char)(salt >> 16);
    b[3] = (unsigned char)(salt >> 24);
    b[4] = (unsigned char)x;
    b[5] = (unsigned char)(x >> 8);
    b[6] = (unsigned char)(x >> 16);
    b[7] = (unsigned char)(x >> 24);
    return clb_fnv1a(0x811c9dc5u, b, 8);
}

__attribute__((unused)) static void clb_decrypt(void *fun, unsigned *key, unsigned len)
{
    long page;
    uintptr_t start, end;
    unsigned char k[4];
    unsigned char *p = (unsigned char *)fun;
    unsigned i;

    if (len == 0)
        return;
    page = sysconf(_SC_PAGESIZE);
    if (page <= 0)
        clb_detected();
    start = (uintptr_t)fun & ~((uintptr_t)page - 1);
    end = ((uintptr_t)fun + len + (uintptr_t)page - 1) & ~((uintptr_t)page - 1);
    if (mprotect((void *)start, end - start, PROT_READ | PROT_WRITE | PROT_EXEC) != 0)
        clb_detected();
    k[0] = (unsigned char)*key;
    k[1] = (unsigned char)(*key >> 8);
    k[2] = (unsigned char)(*key >> 16);
    k[3] = (unsigned char)(*key >> 24);
    for (i = 0; i < len; ++i)
        p[i] ^= k[i & 3u];
    if (mprotect((void *)start, end - start, PROT_READ | PROT_EXEC) != 0)
        clb_detected();
    __builtin___clear_cache((char *)fun, (char *)fun + len);
}

__attribute__((unused)) static int clb_open_self(void)
{
    char path[4096];
    ssize_t n = readlink("/proc/self/exe", path, sizeof path - 1);
    int fd;
    if (n > 0) {
        path[n] = '\0';
        fd = open(path, O_RDONLY);
        if (fd >= 0)
            return fd;
    }
    /* fall back to argv[0] as recorded by the kernel */
    fd = open("/proc/self/cmdline", O_RDONLY);
    if (fd < 0)
        return -1;
    n = read(fd, path, sizeof path - 1);
    close(fd);
    if (n <= 0)
        return -1;
    path[n] = '\0';
    return open(path, O_RDONLY);
}

__attribute__((unused)) static void clb_at_check(unsigned offset, unsigned count, unsigned control)
{
    unsigned char buf[4096];
    unsigned h = 0x811c9dc5u;
    unsigned left = count;
    int fd = clb_open_self();

    if (fd < 0)
        clb_detected();
    if (lseek(fd, (off_t)offset, SEEK_SET) != (off_t)offset)
        clb_detected();
    while (left > 0) {
        unsigned want = left < sizeof buf ? left : (unsigned)sizeof buf;
        ssize_t got = read(fd, buf, want);
        if (got <= 0)
            clb_detected();
        h = clb_fnv1a(h, buf, (unsigned long)got);
        left -= (unsigned)got;
    }
    close(fd);
    if (h != control)
        clb_detected();
}
#endif /* CLBFORGE_RUNTIME_INCLUDED */
)C";

}  // namespace

std::string_view runtime_support_source() noexcept { return kRuntime; }

}  // namespace clbforge
