#include <cstdio>

int main() {
    std::puts("hypou: commands not wired up yet");
    return 1;
}
